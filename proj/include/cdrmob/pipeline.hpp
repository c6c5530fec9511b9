#pragma once

// Stage functions shared by the single-shot report and the per-stage CLI
// commands, plus their file formats.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdrmob/density.hpp"
#include "cdrmob/home.hpp"
#include "cdrmob/ingest.hpp"
#include "cdrmob/manifest.hpp"
#include "cdrmob/metrics.hpp"
#include "cdrmob/patterns.hpp"

namespace cdrmob {

struct PipelineConfig {
  int year = 2008;
  double grid_step = 0.05;
  double fine_step = 0.01;
  AreaBounds area_bounds;
  std::optional<InactiveWindow> night_window;  // override; detected when unset
  double window_hours = 6.0;
  int profile_bin_minutes = 60;
  std::uint32_t min_night_events = 1;
  FilterOptions filter;
  MobilityNormalization normalization = MobilityNormalization::by_activity;
  bool exclude_at_sea = false;
  unsigned threads = 1;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["year"] = year;
    j["grid_step"] = grid_step;
    j["fine_step"] = fine_step;
    j["area_bounds"] = area_bounds.upper;
    j["night_window"] = night_window ? night_window->label() : "auto";
    j["window_hours"] = window_hours;
    j["profile_bin_minutes"] = profile_bin_minutes;
    j["min_night_events"] = min_night_events;
    j["reciprocity_filter"] = !filter.enabled ? "off" : filter.rule == ReciprocityRule::per_pair ? "per_pair" : "in_and_out";
    j["mobility_normalization"] = normalization == MobilityNormalization::by_activity ? "activity" : "pairs";
    j["exclude_at_sea"] = exclude_at_sea;
    return j;  // thread count deliberately left out: results do not depend on it
  }
};

// ---------------------------------------------------------------------------
// Homes

struct HomeStage {
  DailyProfile activity, mobility;
  std::optional<BimodalFit> fit_activity, fit_mobility;
  std::string fit_activity_error, fit_mobility_error;
  InactiveWindow window;
  bool window_detected = true;
  std::vector<std::optional<HomeLocation>> homes;  // per timeline
};

// Sets at_sea on homes whose grid cell holds none of the towers seen in `tl`.
inline void mark_at_sea(std::vector<std::optional<HomeLocation>>& homes, const Timelines& tl, const GridSpec& grid) {
  std::vector<std::uint8_t> used(tl.towers().size(), 0);
  for (const auto& e : tl.all_events()) used[e.tower] = 1;
  std::set<CellIndex> land;
  for (std::uint32_t k = 0; k < used.size(); ++k)
    if (used[k]) land.insert(cell_of(tl.towers().position(k), grid));
  for (auto& h : homes)
    if (h) h->at_sea = !land.contains(cell_of(h->position, grid));
}

inline GridSpec analysis_grid(std::span<const LatLon> homes, double step) {
  if (homes.empty()) throw DataError("no individual has a home location");
  LatLon lo{90.0, 180.0};
  for (const auto& h : homes) {
    lo.lat = std::min(lo.lat, h.lat);
    lo.lon = std::min(lo.lon, h.lon);
  }
  return grid_anchored_at(lo, step, step);
}

inline HomeStage detect_homes(const Timelines& tl, const PipelineConfig& cfg) {
  if (tl.empty()) throw DataError("no surviving individuals");
  HomeStage s;
  s.activity = daily_profile(tl, ProfileMetric::activity, cfg.profile_bin_minutes, cfg.year, {}, cfg.threads);
  s.mobility = daily_profile(tl, ProfileMetric::mobility, cfg.profile_bin_minutes, cfg.year, {}, cfg.threads);
  try {
    s.fit_activity = fit_bimodal(s.activity);
  } catch (const FitError& e) {
    s.fit_activity_error = e.what();
  }
  try {
    s.fit_mobility = fit_bimodal(s.mobility);
  } catch (const FitError& e) {
    s.fit_mobility_error = e.what();
  }
  if (cfg.night_window) {
    s.window = *cfg.night_window;
    s.window_detected = false;
  } else {
    s.window = find_inactive_window(s.activity, cfg.window_hours);
  }
  s.homes = compute_homes(tl, s.window, cfg.min_night_events, cfg.threads);
  std::vector<LatLon> pos;
  for (const auto& h : s.homes)
    if (h) pos.push_back(h->position);
  if (!pos.empty()) mark_at_sea(s.homes, tl, analysis_grid(pos, cfg.grid_step));
  return s;
}

// Individuals with a usable home; every later stage works on this set.
struct Population {
  Timelines timelines;
  std::vector<HomeLocation> homes;

  std::vector<LatLon> positions() const {
    std::vector<LatLon> p;
    p.reserve(homes.size());
    for (const auto& h : homes) p.push_back(h.position);
    return p;
  }
  std::vector<std::optional<LatLon>> optional_positions() const {
    std::vector<std::optional<LatLon>> p;
    p.reserve(homes.size());
    for (const auto& h : homes) p.emplace_back(h.position);
    return p;
  }
};

inline Population homed_population(const Timelines& tl, std::span<const std::optional<HomeLocation>> homes,
                                   bool exclude_at_sea) {
  std::vector<std::uint8_t> keep(tl.size(), 0);
  Population p;
  for (std::size_t k = 0; k < tl.size(); ++k)
    if (homes[k] && !(exclude_at_sea && homes[k]->at_sea)) {
      keep[k] = 1;
      p.homes.push_back(*homes[k]);
    }
  p.timelines = tl.subset(keep);
  if (p.timelines.empty()) throw DataError("no individual has a home location");
  return p;
}

inline constexpr std::string_view kHomesHeader = "ego_id,lat,lon,support,at_sea";

inline void write_homes_csv(const std::string& path, std::span<const std::string> egos,
                            std::span<const HomeLocation> homes) {
  CsvWriter w(path);
  w.line(kHomesHeader);
  for (std::size_t k = 0; k < egos.size(); ++k) {
    auto& b = w.buffer();
    b += egos[k];
    b += ',';
    append_double(b, homes[k].position.lat);
    b += ',';
    append_double(b, homes[k].position.lon);
    b += ',';
    b += std::to_string(homes[k].support);
    b += ',';
    b += homes[k].at_sea ? '1' : '0';
    b += '\n';
    w.maybe_flush();
  }
  w.close();
}

struct HomeTable {
  std::vector<std::string> egos;  // ascending
  std::vector<HomeLocation> homes;
};

inline HomeTable read_homes_csv(const std::string& path) {
  auto in = open_input(path);
  HomeTable t;
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("ego_id", 0) == 0) continue;
    if (trim(line).empty()) continue;
    split_fields(line, ',', f);
    const auto where = path + ":" + std::to_string(lineno);
    if (f.size() != 5) throw DataError(where + ": expected ego_id,lat,lon,support,at_sea");
    const auto lat = parse_double(f[1]);
    const auto lon = parse_double(f[2]);
    const auto sup = parse_int<std::uint32_t>(f[3]);
    if (!lat || !lon || !sup || !valid_coordinate({*lat, *lon}) || (f[4] != "0" && f[4] != "1"))
      throw DataError(where + ": malformed home row");
    if (!t.egos.empty() && !(t.egos.back() < f[0])) throw DataError(where + ": homes must be sorted by unique ego id");
    t.egos.emplace_back(f[0]);
    t.homes.push_back(HomeLocation{{*lat, *lon}, *sup, f[4] == "1"});
  }
  if (t.egos.empty()) throw DataError(path + ": no homes");
  return t;
}

// Population from timelines restricted to the egos listed in a homes table.
inline Population population_from_table(const Timelines& tl, const HomeTable& table) {
  std::vector<std::uint8_t> keep(tl.size(), 0);
  for (const auto& id : table.egos) {
    const auto k = tl.find(id);
    if (!k) throw DataError("homes file names an individual missing from the CDR: " + id);
    keep[*k] = 1;
  }
  Population p;
  p.timelines = tl.subset(keep);
  p.homes = table.homes;
  return p;
}

inline void write_profile_csv(const std::string& path, const DailyProfile& p) {
  CsvWriter w(path);
  w.line("bin_start,value");
  for (std::size_t k = 0; k < p.bins(); ++k) {
    auto& b = w.buffer();
    b += format_clock(static_cast<int>(k) * p.bin_minutes);
    b += ',';
    append_double(b, p.values[k]);
    b += '\n';
  }
  w.close();
}

inline nlohmann::ordered_json to_json(const BimodalFit& f) {
  const auto clock = [](double h) { return format_clock(static_cast<int>(std::lround(h * 60.0)) % 1440); };
  return {{"mu_day_h", f.day.mu},       {"mu_day_clock", clock(f.day.mu)},
          {"sigma_day_h", f.day.sigma}, {"amp_day", f.day.amplitude},
          {"mu_eve_h", f.evening.mu},   {"mu_eve_clock", clock(f.evening.mu)},
          {"sigma_eve_h", f.evening.sigma}, {"amp_eve", f.evening.amplitude},
          {"baseline", f.baseline},     {"residual_norm", f.residual_norm},
          {"iterations", f.iterations}};
}

// Two published readings of the daily activity fit (they disagree).
inline nlohmann::ordered_json reference_fits() {
  return {{"figure_caption", {{"mu_day_h", 12.0 + 58.0 / 60}, {"sigma_day_h", 2.36}, {"mu_eve_h", 19.0 + 43.0 / 60}, {"sigma_eve_h", 2.31}}},
          {"appendix", {{"mu_day_h", 12.75}, {"sigma_day_h", 2.72}, {"mu_eve_h", 19.0 + 38.0 / 60}, {"sigma_eve_h", 3.14}}}};
}

inline nlohmann::ordered_json fits_json(const HomeStage& s) {
  nlohmann::ordered_json j;
  j["inactivity_window"] = s.window.label();
  j["window_detected"] = s.window_detected;
  j["activity"] = s.fit_activity ? to_json(*s.fit_activity) : nlohmann::ordered_json{{"error", s.fit_activity_error}};
  j["mobility"] = s.fit_mobility ? to_json(*s.fit_mobility) : nlohmann::ordered_json{{"error", s.fit_mobility_error}};
  j["reference"] = reference_fits();
  return j;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricInputs {
  explicit MetricInputs(int year, std::size_t egos)
      : year_spec{Granularity::whole_year, year, {}},
        month_spec{Granularity::calendar_month, year, {}},
        hour_spec{Granularity::hour_of_day, year, {}},
        day_spec{Granularity::calendar_day, year, {}},
        hour_A(hour_spec, Axis::hour, CellMetric::activity, egos),
        hour_M(hour_spec, Axis::hour, CellMetric::mobility, egos),
        day_A(day_spec, Axis::weekday, CellMetric::activity, egos),
        day_M(day_spec, Axis::weekday, CellMetric::mobility, egos),
        month_A(month_spec, Axis::month, CellMetric::activity, egos),
        month_M(month_spec, Axis::month, CellMetric::mobility, egos) {}

  WindowSpec year_spec, month_spec, hour_spec, day_spec;
  std::vector<MetricRow> year, month, hour;
  EgoBinValues hour_A, hour_M, day_A, day_M, month_A, month_M;

  void add_day(std::span<const MetricRow> rows) {
    day_A.add(rows);
    day_M.add(rows);
  }
  void finish_tables() {
    hour_A.add(hour);
    hour_M.add(hour);
    month_A.add(month);
    month_M.add(month);
  }
};

inline MetricInputs compute_metric_inputs(const Population& pop, const PipelineConfig& cfg) {
  MetricInputs m(cfg.year, pop.timelines.size());
  const auto homes = pop.optional_positions();
  MetricsOptions opt{cfg.normalization, cfg.threads};
  m.year = metrics_table(pop.timelines, homes, m.year_spec, opt);
  m.month = metrics_table(pop.timelines, homes, m.month_spec, opt);
  m.hour = metrics_table(pop.timelines, homes, m.hour_spec, opt);
  for_each_metric_rows(pop.timelines, homes, m.day_spec, opt, [&](std::span<const MetricRow> r) { m.add_day(r); });
  m.finish_tables();
  return m;
}

inline void write_metrics_csv(const std::string& path, std::span<const std::string> egos,
                              std::span<const MetricRow> rows, const WindowSpec& spec) {
  CsvWriter w(path);
  w.line(kMetricsHeader);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < spec.window_count(); ++k) labels.push_back(spec.label(k));
  for (const auto& r : rows) {
    append_metric_row(w.buffer(), egos[r.ego], labels[r.window], r);
    w.maybe_flush();
  }
  w.close();
}

// Streams one granularity straight to CSV (for the large per-day tables).
inline void write_metrics_csv(const std::string& path, const Population& pop, const WindowSpec& spec,
                              const PipelineConfig& cfg) {
  CsvWriter w(path);
  w.line(kMetricsHeader);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < spec.window_count(); ++k) labels.push_back(spec.label(k));
  const auto homes = pop.optional_positions();
  for_each_metric_rows(pop.timelines, homes, spec, MetricsOptions{cfg.normalization, cfg.threads},
                       [&](std::span<const MetricRow> rows) {
                         for (const auto& r : rows) {
                           append_metric_row(w.buffer(), pop.timelines.ego_id(r.ego), labels[r.window], r);
                           w.maybe_flush();
                         }
                       });
  w.close();
}

// Rebuilds metric inputs from per-granularity metric files. All tables must
// list the same individuals as `egos`.
inline MetricInputs metric_inputs_from_tables(std::span<const std::string> egos, const MetricTable& year,
                                              const MetricTable& month, const MetricTable& day,
                                              const MetricTable& hour) {
  const auto check = [&](const MetricTable& t, Granularity g, const char* name) {
    if (t.spec.granularity != g) throw DataError(std::string(name) + " metrics file has the wrong window granularity");
    if (!std::equal(t.egos.begin(), t.egos.end(), egos.begin(), egos.end()))
      throw DataError(std::string(name) + " metrics file does not list the same individuals as the homes file");
  };
  check(year, Granularity::whole_year, "year");
  check(month, Granularity::calendar_month, "month");
  check(day, Granularity::calendar_day, "day");
  check(hour, Granularity::hour_of_day, "hour");
  MetricInputs m(year.spec.year, egos.size());
  m.year = year.rows;
  m.month = month.rows;
  m.hour = hour.rows;
  m.add_day(day.rows);
  m.finish_tables();
  return m;
}

// ---------------------------------------------------------------------------
// Density and areas

struct DensityStage {
  GridSpec grid;
  GridDensity density;
  RankedCells ranked;
  std::array<std::optional<double>, 3> rho;  // corr(R_rho, R_A), (R_rho, R_M), (R_rho, R_Rg)
  std::vector<std::pair<CellMetric, std::vector<Band>>> bands;
  RankSize rank_size;
  AreaMap areas;
  std::vector<AreaSummary> area_table;
  std::vector<int> ego_area;  // per individual
};

inline std::vector<EgoValues> ego_values(std::span<const HomeLocation> homes, std::span<const MetricRow> year_rows) {
  std::vector<EgoValues> v(homes.size());
  for (std::size_t k = 0; k < homes.size(); ++k) v[k].home = homes[k].position;
  for (const auto& r : year_rows) {
    if (r.ego >= v.size()) throw DataError("metric row for an individual without a home");
    v[r.ego].A = r.A;
    v[r.ego].M = r.M;
    v[r.ego].Rg = r.Rg;
  }
  return v;
}

inline DensityStage analyse_density(std::span<const HomeLocation> homes, std::span<const MetricRow> year_rows,
                                    const PipelineConfig& cfg) {
  DensityStage d;
  std::vector<LatLon> pos;
  for (const auto& h : homes) pos.push_back(h.position);
  d.grid = analysis_grid(pos, cfg.grid_step);
  d.density = build_density(pos, d.grid);
  const auto values = ego_values(homes, year_rows);
  d.ranked = rank_cells(d.density, cell_means(values, d.grid));
  for (int m = 0; m < 3; ++m) {
    try {
      d.rho[static_cast<std::size_t>(m)] = d.ranked.correlation(static_cast<CellMetric>(m));
    } catch (const StatError&) {
    }
    d.bands.emplace_back(static_cast<CellMetric>(m), sliding_correlation(d.ranked, static_cast<CellMetric>(m)));
  }
  d.rank_size = rank_size(d.density);
  d.areas = classify_areas(d.ranked, cfg.area_bounds);
  d.area_table = area_table(d.ranked, d.areas, pos, cfg.fine_step);
  for (const auto& p : pos) d.ego_area.push_back(*d.areas.area_of(p));
  return d;
}

inline nlohmann::ordered_json density_json(const DensityStage& d) {
  nlohmann::ordered_json j;
  j["grid"] = {{"lat_step", d.grid.lat_step}, {"lon_step", d.grid.lon_step},
               {"origin_lat", d.grid.origin.lat}, {"origin_lon", d.grid.origin.lon}};
  j["inhabited_cells"] = d.ranked.cells.size();
  const std::array<std::string_view, 3> names{"rho_R_A", "rho_R_M", "rho_R_Rg"};
  for (std::size_t m = 0; m < 3; ++m) {
    if (d.rho[m]) j[std::string(names[m])] = *d.rho[m];
    else j[std::string(names[m])] = nullptr;
  }
  j["reference"] = {{"rho_R_A", 0.38}, {"rho_R_M", -0.11}};
  if (d.rank_size.fit) {
    const auto& f = *d.rank_size.fit;
    j["rank_size_fit"] = {{"exponent", f.exponent}, {"intercept", f.intercept}, {"r2", f.r2},
                          {"rank_min", f.rank_min}, {"rank_max", f.rank_max}};
  } else {
    j["rank_size_fit"] = {{"error", d.rank_size.note}};
  }
  auto& sc = j["sign_change_rank"] = nlohmann::ordered_json::object();
  for (const auto& [metric, bands] : d.bands) {
    const auto r = sign_change_rank(bands);
    if (r) sc[std::string(to_string(metric))] = *r;
    else sc[std::string(to_string(metric))] = nullptr;
  }
  auto& areas = j["areas"] = nlohmann::ordered_json::array();
  for (const auto& a : d.area_table)
    areas.push_back({{"area", area_name(a.area)}, {"cells", a.cells}, {"egos", a.egos},
                     {"rank_lo", a.rank_lo}, {"rank_hi", a.rank_hi},
                     {"mean_density_km2", a.mean_density}, {"mean_fine_density_km2", a.mean_fine_density},
                     {"reference_density_km2", a.reference_density}});
  return j;
}

// Two-column rank-size and correlation-band files; returns names relative to `dir`.
inline std::vector<std::string> write_density_plot_data(const std::filesystem::path& dir, const DensityStage& d) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names{"rank_size.dat"};
  {
    CsvWriter w((dir / names.back()).string());
    for (std::size_t k = 0; k < d.rank_size.densities.size(); ++k) {
      auto& b = w.buffer();
      b += std::to_string(k + 1);
      b += ' ';
      append_double(b, d.rank_size.densities[k]);
      b += '\n';
      w.maybe_flush();
    }
    w.close();
  }
  for (const auto& [metric, bands] : d.bands) {
    names.push_back(fmt::format("bands_{}.dat", to_string(metric)));
    CsvWriter w((dir / names.back()).string());
    for (const auto& b : bands) {
      if (!b.rho) continue;
      append_double(w.buffer(), b.center());
      w.buffer() += ' ';
      append_double(w.buffer(), *b.rho);
      w.buffer() += '\n';
    }
    w.close();
  }
  return names;
}

// ---------------------------------------------------------------------------
// Patterns

struct PatternStage {
  std::vector<PatternSeries> area_series;    // per area and overall
  std::vector<PatternSeries> gender_series;  // per (area, gender[, age group])
  std::vector<GenderDiff> diffs;
  std::vector<std::string> notices;

  const PatternSeries* find(CellMetric m, Axis a, Statistic s, const CohortKey& key) const {
    for (const auto* set : {&area_series, &gender_series})
      for (const auto& p : *set)
        if (p.metric == m && p.axis == a && p.statistic == s && p.key == key) return &p;
    return nullptr;
  }
};

inline std::vector<EgoCohort> ego_cohorts(std::span<const std::string> egos, std::span<const int> areas,
                                          const Demographics* demo) {
  std::vector<EgoCohort> c(egos.size());
  for (std::size_t k = 0; k < egos.size(); ++k) {
    c[k].area = areas[k];
    if (demo)
      if (const Person* p = demo->find(egos[k])) {
        c[k].gender = p->gender;
        c[k].age = age_group_of(p->age);
      }
  }
  return c;
}

inline PatternStage analyse_patterns(const MetricInputs& m, std::span<const EgoCohort> cohorts) {
  PatternStage s;
  const auto keep_notices = [&](PatternSet&& set, std::vector<PatternSeries>& dst) {
    for (auto& p : set.series) dst.push_back(std::move(p));
    for (auto& n : set.notices) s.notices.push_back(std::move(n));
  };
  for (const EgoBinValues* v : {&m.hour_A, &m.hour_M, &m.day_A, &m.day_M, &m.month_A, &m.month_M})
    for (Statistic st : {Statistic::normalized_median, Statistic::mean}) {
      try {
        s.area_series.push_back(pattern(*v, cohorts, CohortKey{}, st));
      } catch (const std::runtime_error& e) {
        s.notices.emplace_back(e.what());
      }
      keep_notices(seasonal_by_area(*v, cohorts, st), s.area_series);
    }
  for (const EgoBinValues* v : {&m.month_A, &m.month_M}) keep_notices(gender_age_patterns(*v, cohorts, Statistic::mean), s.gender_series);

  const auto yv = year_values(m.year, cohorts.size());
  const auto diff = [&](std::optional<int> area, std::optional<AgeGroup> age) {
    try {
      s.diffs.push_back(gender_diff(yv, cohorts, area, age));
    } catch (const StatError& e) {
      s.notices.emplace_back(e.what());
    }
  };
  diff(std::nullopt, std::nullopt);
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a) diff(a, std::nullopt);
  for (std::size_t g = 0; g < kAgeGroupCount; ++g) diff(std::nullopt, static_cast<AgeGroup>(g));
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a)
    for (std::size_t g = 0; g < kAgeGroupCount; ++g) diff(a, static_cast<AgeGroup>(g));
  return s;
}

inline void write_patterns_csv(const std::string& path, const PatternStage& s) {
  CsvWriter w(path);
  w.line(kPatternHeader);
  for (const auto* set : {&s.area_series, &s.gender_series})
    for (const auto& p : *set) {
      append_pattern_rows(w.buffer(), p);
      w.maybe_flush();
    }
  w.close();
}

inline nlohmann::ordered_json patterns_json(const PatternStage& s) {
  nlohmann::ordered_json j;
  auto& series = j["series"] = nlohmann::ordered_json::array();
  for (const auto* set : {&s.area_series, &s.gender_series})
    for (const auto& p : *set) series.push_back(to_json(p));
  auto& diffs = j["gender_differences"] = nlohmann::ordered_json::array();
  for (const auto& d : s.diffs) diffs.push_back(to_json(d));
  j["notices"] = s.notices;
  return j;
}

inline void write_gender_diff_csv(const std::string& path, std::span<const GenderDiff> diffs) {
  CsvWriter w(path);
  w.line("area,age_group,dA,se_A,dM,se_M,n_female,n_male");
  for (const auto& d : diffs) {
    auto& b = w.buffer();
    if (d.key.area) b += area_name(*d.key.area);
    b += ',';
    if (d.key.age) b += to_string(*d.key.age);
    b += ',';
    append_double(b, d.dA);
    b += ',';
    append_double(b, d.se_A);
    b += ',';
    append_double(b, d.dM);
    b += ',';
    append_double(b, d.se_M);
    b += ',';
    b += std::to_string(d.n_female);
    b += ',';
    b += std::to_string(d.n_male);
    b += '\n';
  }
  w.close();
}

// Highlights of the weekly and seasonal series per area.
inline nlohmann::ordered_json pattern_highlights(const PatternStage& s) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a) {
    const CohortKey key{a, {}, {}};
    nlohmann::ordered_json h;
    if (const auto* w = s.find(CellMetric::activity, Axis::weekday, Statistic::normalized_median, key)) {
      h["weekly_A_max"] = bin_label(Axis::weekday, *w->argmax());
      h["weekly_A_min"] = bin_label(Axis::weekday, *w->argmin());
    }
    if (const auto* m = s.find(CellMetric::activity, Axis::month, Statistic::normalized_median, key))
      if (m->values[6] && m->values[7] && m->values[8])
        h["august_A_ratio"] = *m->values[7] / (0.5 * (*m->values[6] + *m->values[8]));
    if (!h.empty()) j[area_name(a)] = h;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Full report

struct ReportResult {
  IngestStats stats;
  std::vector<std::string> removed;
  HomeStage home;
  Population population;
  std::optional<MetricInputs> metrics;
  DensityStage density;
  PatternStage patterns;
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
};

inline ReportResult run_report(EventStore store, std::shared_ptr<const TowerRegistry> towers,
                               const Demographics* demo, const PipelineConfig& cfg) {
  ReportResult r;
  Stopwatch clock;
  const auto lap = [&](const char* name, Stopwatch& sw) { r.timings[name] = sw.seconds(); sw = Stopwatch(); };
  IngestResult in = ingest(std::move(store), std::move(towers), cfg.filter, cfg.threads);
  r.stats = in.stats;
  r.removed = std::move(in.removed_unilateral);
  if (in.timelines.empty()) throw DataError("no surviving individuals");
  lap("ingest", clock);
  r.home = detect_homes(in.timelines, cfg);
  r.population = homed_population(in.timelines, r.home.homes, cfg.exclude_at_sea);
  r.stats.individuals_without_home = in.timelines.size() - r.population.timelines.size();
  in = IngestResult{};
  lap("homes", clock);
  r.metrics.emplace(compute_metric_inputs(r.population, cfg));
  lap("metrics", clock);
  r.density = analyse_density(r.population.homes, r.metrics->year, cfg);
  lap("density", clock);
  const auto cohorts = ego_cohorts(r.population.timelines.ego_ids(), r.density.ego_area, demo);
  r.patterns = analyse_patterns(*r.metrics, cohorts);
  lap("patterns", clock);
  return r;
}

inline nlohmann::ordered_json summary_json(const ReportResult& r) {
  nlohmann::ordered_json j;
  j["ingest"] = to_json(r.stats);
  j["individuals_analysed"] = r.population.timelines.size();
  j["daily_fit"] = fits_json(r.home);
  j["inactivity_window"] = r.home.window.label();
  j["density"] = density_json(r.density);
  j["patterns"] = pattern_highlights(r.patterns);
  nlohmann::ordered_json diffs = nlohmann::ordered_json::array();
  for (const auto& d : r.patterns.diffs)
    if (!d.key.age) diffs.push_back(to_json(d));
  j["gender_differences"] = diffs;
  return j;
}

// Writes every analytic output of a report; returns paths relative to `dir`.
inline std::vector<std::filesystem::path> write_report(const ReportResult& r, const std::filesystem::path& dir,
                                                       bool plot_data) {
  std::vector<std::filesystem::path> out;
  const auto path = [&](const char* name) {
    out.emplace_back(name);
    return (dir / name).string();
  };
  const auto egos = r.population.timelines.ego_ids();
  write_json_file(path("ingest_stats.json"), to_json(r.stats));
  {
    CsvWriter w(path("removed_ids.txt"));
    for (const auto& id : r.removed) w.line(id);
    w.close();
  }
  write_profile_csv(path("profile_activity.csv"), r.home.activity);
  write_profile_csv(path("profile_mobility.csv"), r.home.mobility);
  write_json_file(path("fit.json"), fits_json(r.home));
  write_homes_csv(path("homes.csv"), egos, r.population.homes);
  write_metrics_csv(path("metrics_year.csv"), egos, r.metrics->year, r.metrics->year_spec);
  write_metrics_csv(path("metrics_month.csv"), egos, r.metrics->month, r.metrics->month_spec);
  write_metrics_csv(path("metrics_hour.csv"), egos, r.metrics->hour, r.metrics->hour_spec);
  write_grid_csv(path("grid.csv"), r.density.ranked, r.density.areas);
  write_rank_size_csv(path("rank_size.csv"), r.density.rank_size);
  write_bands_csv(path("correlation_bands.csv"), r.density.bands);
  write_area_csv(path("areas.csv"), r.density.area_table);
  write_json_file(path("density.json"), density_json(r.density));
  write_patterns_csv(path("patterns.csv"), r.patterns);
  write_json_file(path("patterns.json"), patterns_json(r.patterns));
  write_gender_diff_csv(path("gender_diff.csv"), r.patterns.diffs);
  write_json_file(path("summary.json"), summary_json(r));
  if (plot_data) {
    std::vector<PatternSeries> all(r.patterns.area_series);
    all.insert(all.end(), r.patterns.gender_series.begin(), r.patterns.gender_series.end());
    write_plot_data(dir / "plot", all);
    for (const auto& s : all) out.emplace_back(std::filesystem::path("plot") / (series_file_stem(s) + ".dat"));
    for (const auto& n : write_density_plot_data(dir / "plot", r.density)) out.emplace_back(std::filesystem::path("plot") / n);
  }
  return out;
}

}  // namespace cdrmob
