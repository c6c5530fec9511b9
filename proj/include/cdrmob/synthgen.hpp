#pragma once

// Synthetic CDR corpora with planted structure.
//
// Homes sit in Zipf-weighted 0.05 degree cells; towers on a 0.01 degree
// lattice. Event times come from thinning a two-Gaussian daily intensity
// modulated by weekday and month tables, and locations from a home tower plus
// a few satellites whose distance shrinks with local density.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "cdrmob/core.hpp"
#include "cdrmob/density.hpp"
#include "cdrmob/ingest.hpp"
#include "cdrmob/manifest.hpp"
#include "cdrmob/parallel.hpp"

namespace cdrmob {

// ---------------------------------------------------------------------------
// Random numbers. mt19937_64 output is fully specified by the standard; the
// distributions below are written out so corpora match across toolchains.

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}

  double uniform() noexcept { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  // (0, 1]
  double uniform_pos() noexcept { return static_cast<double>((g_() >> 11) + 1) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(g_()) * n) >> 64);
  }
  bool bernoulli(double p) noexcept { return uniform() < p; }
  double exponential(double rate) noexcept { return -std::log(uniform_pos()) / rate; }
  double normal() noexcept {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  template <std::size_t N>
  std::size_t pick(const std::array<double, N>& weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t k = 0; k + 1 < N; ++k) {
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    return N - 1;
  }

 private:
  std::mt19937_64 g_;
};

// ---------------------------------------------------------------------------
// Configuration

struct Region {
  double lat_min = 36.0, lat_max = 41.0;
  double lon_min = 20.0, lon_max = 28.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Region, lat_min, lat_max, lon_min, lon_max)

inline constexpr std::array<double, 12> kBaseMonthActivity{0.95, 0.97, 1.03, 1.05, 1.06, 1.07,
                                                           1.07, 1.06, 1.00, 0.96, 0.93, 0.97};

inline std::array<std::array<double, 12>, kAreaCount> default_month_activity() {
  std::array<std::array<double, 12>, kAreaCount> t{};
  for (std::size_t a = 0; a < kAreaCount; ++a) {
    t[a] = kBaseMonthActivity;
    if (a < 3) t[a][7] *= 0.75;  // August holiday dip in the dense areas
  }
  return t;
}

struct GenConfig {
  std::uint64_t seed = 1;
  int year = 2008;
  std::size_t n_individuals = 10000;
  std::size_t n_cells = 10000;  // settlement cells
  double zipf_s = 1.0;
  Region region;
  double cell_step = 0.05;
  double tower_step = 0.01;

  // Daily rhythm, hours
  double mu_day = 12.97, sigma_day = 2.36;
  double mu_eve = 19.72, sigma_eve = 2.31;
  double weight_day = 0.5;
  double night_floor = 0.05;  // share of the daily mass spread uniformly

  std::array<double, 7> weekday{1.0, 1.0, 1.02, 1.05, 1.20, 1.10, 0.75};
  std::array<std::array<double, 12>, kAreaCount> month_activity = default_month_activity();
  std::array<double, 12> month_mobility{1.20, 1.08, 1.04, 1.00, 0.98, 0.98,
                                        1.03, 1.10, 0.90, 0.86, 0.82, 0.84};

  double rate_per_day = 0.5;
  double rate_sigma = 0.3;  // log-normal spread of individual rates
  double beta = 0.15;       // activity ~ (rho / rho_bar)^beta
  std::size_t flip_rank = 0;  // >0: density ranks up to here use beta_dense instead
  double beta_dense = -0.3;
  double gamma = 0.2;       // satellite distance ~ (rho / rho_bar)^-gamma
  double lambda0_km = 3.0;

  double night_start = 1.0, night_end = 7.0;  // hours
  double p_home_night = 0.95;
  double p_away = 0.35;  // daytime chance of being at a satellite
  std::array<double, 4> satellite_weights{0.5, 0.25, 0.15, 0.10};
  // Satellite distances in units of the local scale, with log-normal jitter.
  // Fixed multiples keep per-person mobility close to symmetric around its mean.
  std::array<double, 4> satellite_distances{0.5, 1.0, 1.5, 2.5};
  double satellite_jitter = 0.2;

  double female_fraction = 0.41;
  double demographics_fraction = 0.8;
  std::array<double, kAreaCount> female_activity_excess{0.40, 0.30, 0.20, 0.12, 0.05};
  double teen_gap_factor = 2.0;
  double female_mobility = 1.1;  // multiplies p_away
  std::array<double, kAgeGroupCount> age_activity{0.9, 1.2, 1.05, 1.0, 0.9, 0.75};
  int age_min = 12, age_max = 80;

  double spam_fraction = 0.05;  // of all ids
  double spam_rate_per_day = 1.0;
  std::size_t contacts = 5;
  std::size_t buddies = 2;
  double onnet_fraction = 0.02;
  double call_fraction = 0.55;
  std::array<double, 4> area_bounds{30, 100, 1000, 10000};

  void validate() const;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    GenConfig, seed, year, n_individuals, n_cells, zipf_s, region, cell_step, tower_step, mu_day,
    sigma_day, mu_eve, sigma_eve, weight_day, night_floor, weekday, month_activity, month_mobility,
    rate_per_day, rate_sigma, beta, flip_rank, beta_dense, gamma, lambda0_km, night_start, night_end,
    p_home_night, p_away, satellite_weights, satellite_distances, satellite_jitter, female_fraction, demographics_fraction,
    female_activity_excess, teen_gap_factor, female_mobility, age_activity, age_min, age_max,
    spam_fraction, spam_rate_per_day, contacts, buddies, onnet_fraction, call_fraction, area_bounds)

namespace detail {

inline std::size_t steps_in(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::llround((hi - lo) / step));
}

}  // namespace detail

inline void GenConfig::validate() const {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("generator config: " + m); };
  if (n_individuals == 0) fail("n_individuals must be positive");
  if (n_cells == 0) fail("n_cells must be positive");
  if (!(region.lat_min < region.lat_max) || !(region.lon_min < region.lon_max)) fail("empty region");
  if (region.lat_min != std::floor(region.lat_min) || region.lon_min != std::floor(region.lon_min))
    fail("region must start on whole degrees");
  if (region.lat_min < -80 || region.lat_max > 80 || region.lon_min < -180 || region.lon_max > 180)
    fail("region outside the supported latitude/longitude range");
  if (!(cell_step > 0) || !(tower_step > 0)) fail("steps must be positive");
  const double ratio = cell_step / tower_step;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) fail("cell_step must be a multiple of tower_step");
  const std::size_t cells = detail::steps_in(region.lat_min, region.lat_max, cell_step) *
                            detail::steps_in(region.lon_min, region.lon_max, cell_step);
  if (n_cells > cells) fail("n_cells exceeds the cells in the region");
  if (zipf_s < 0) fail("zipf_s must be non-negative");
  if (!(sigma_day > 0) || !(sigma_eve > 0)) fail("sigma must be positive");
  if (!(mu_day >= 0 && mu_day < 24 && mu_eve >= 0 && mu_eve < 24)) fail("peak times must lie in [0, 24)");
  const auto prob = [&](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) fail(std::string(name) + " must be a probability");
  };
  prob(weight_day, "weight_day");
  prob(night_floor, "night_floor");
  prob(p_home_night, "p_home_night");
  prob(p_away, "p_away");
  prob(female_fraction, "female_fraction");
  prob(demographics_fraction, "demographics_fraction");
  prob(spam_fraction, "spam_fraction");
  prob(onnet_fraction, "onnet_fraction");
  prob(call_fraction, "call_fraction");
  if (spam_fraction >= 1) fail("spam_fraction must be below 1");
  const auto positive = [&](auto&& range, const char* name) {
    for (double v : range)
      if (!(v > 0)) fail(std::string(name) + " multipliers must be positive");
  };
  positive(weekday, "weekday");
  for (const auto& m : month_activity) positive(m, "month_activity");
  positive(month_mobility, "month_mobility");
  positive(age_activity, "age_activity");
  positive(satellite_weights, "satellite_weights");
  positive(satellite_distances, "satellite_distances");
  if (!(satellite_jitter >= 0)) fail("satellite_jitter must be non-negative");
  for (double e : female_activity_excess)
    if (!(e > -1)) fail("female_activity_excess must exceed -1");
  if (!(female_mobility > 0) || !(teen_gap_factor >= 0)) fail("gender factors must be positive");
  if (!(rate_per_day > 0) || !(rate_sigma >= 0) || !(spam_rate_per_day >= 0)) fail("rates must be positive");
  if (!(lambda0_km > 0)) fail("lambda0_km must be positive");
  if (!(night_start >= 0 && night_start < night_end && night_end <= 24)) fail("bad night window");
  if (age_min < kMinAge || age_max > kMaxAge || age_min > age_max) fail("bad age range");
  if (contacts == 0) fail("contacts must be positive");
  AreaBounds{area_bounds}.validate();
}

// ---------------------------------------------------------------------------
// Ground truth

struct TrueEgo {
  std::string id;
  LatLon home;  // home tower position
  CellIndex cell;
  int area = 0;  // 0-based
  double density_rank = 0.0;
  double density = 0.0;  // homes per km2 in the home cell
  Gender gender = Gender::female;
  int age = 0;
  bool in_demographics = false;
  double rate_per_day = 0.0;  // before weekday and month factors
  double satellite_scale_km = 0.0;
};

struct GroundTruth {
  GenConfig config;
  GridSpec grid;
  std::vector<TrueEgo> egos;         // genuine individuals, ascending id
  std::vector<std::string> spam_ids;  // ascending

  const TrueEgo* find(std::string_view id) const {
    auto it = std::lower_bound(egos.begin(), egos.end(), id,
                               [](const TrueEgo& e, std::string_view s) { return e.id < s; });
    return it != egos.end() && it->id == id ? &*it : nullptr;
  }
};

inline nlohmann::ordered_json to_json(const GroundTruth& t) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::json(t.config);
  j["night_window"] = fmt::format("{}-{}", format_clock(static_cast<int>(std::lround(t.config.night_start * 60))),
                                  format_clock(static_cast<int>(std::lround(t.config.night_end * 60))));
  j["grid"] = {{"lat_step", t.grid.lat_step}, {"lon_step", t.grid.lon_step},
               {"origin_lat", t.grid.origin.lat}, {"origin_lon", t.grid.origin.lon}};
  j["spam_ids"] = t.spam_ids;
  auto& egos = j["egos"] = nlohmann::ordered_json::array();
  for (const auto& e : t.egos) {
    nlohmann::ordered_json r;
    r["id"] = e.id;
    r["lat"] = e.home.lat;
    r["lon"] = e.home.lon;
    r["cell_i"] = e.cell.i;
    r["cell_j"] = e.cell.j;
    r["area"] = e.area + 1;
    r["density_rank"] = e.density_rank;
    r["density"] = e.density;
    r["gender"] = to_string(e.gender);
    r["age"] = e.age;
    r["in_demographics"] = e.in_demographics;
    r["rate_per_day"] = e.rate_per_day;
    r["satellite_scale_km"] = e.satellite_scale_km;
    egos.push_back(std::move(r));
  }
  return j;
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  try {
    t.config = j.at("config").get<GenConfig>();
    const auto& g = j.at("grid");
    t.grid = GridSpec{g.at("lat_step").get<double>(), g.at("lon_step").get<double>(),
                      {g.at("origin_lat").get<double>(), g.at("origin_lon").get<double>()}};
    t.spam_ids = j.at("spam_ids").get<std::vector<std::string>>();
    for (const auto& r : j.at("egos")) {
      TrueEgo e;
      e.id = r.at("id").get<std::string>();
      e.home = {r.at("lat").get<double>(), r.at("lon").get<double>()};
      e.cell = {r.at("cell_i").get<int>(), r.at("cell_j").get<int>()};
      e.area = r.at("area").get<int>() - 1;
      e.density_rank = r.at("density_rank").get<double>();
      e.density = r.at("density").get<double>();
      const auto gender = parse_gender(r.at("gender").get<std::string>());
      if (!gender) throw DataError("truth file: bad gender for " + e.id);
      e.gender = *gender;
      e.age = r.at("age").get<int>();
      e.in_demographics = r.at("in_demographics").get<bool>();
      e.rate_per_day = r.at("rate_per_day").get<double>();
      e.satellite_scale_km = r.at("satellite_scale_km").get<double>();
      t.egos.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("truth file: ") + e.what());
  }
  if (!std::is_sorted(t.egos.begin(), t.egos.end(), [](const TrueEgo& a, const TrueEgo& b) { return a.id < b.id; }))
    throw DataError("truth file: egos not sorted by id");
  return t;
}

inline GroundTruth load_ground_truth(const std::string& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return ground_truth_from_json(j);
}

// ---------------------------------------------------------------------------
// Daily intensity

class Circadian {
 public:
  explicit Circadian(const GenConfig& c)
      : mu_{c.mu_day, c.mu_eve}, sigma_{c.sigma_day, c.sigma_eve}, w_{c.weight_day, 1.0 - c.weight_day},
        floor_(c.night_floor) {
    for (int k = 0; k <= 24000; ++k) fmax_ = std::max(fmax_, density(k / 1000.0));
    fmax_ *= 1.0001;
  }

  // Probability density over [0, 24) hours; Gaussians wrapped around midnight.
  double density(double h) const noexcept {
    double g = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int wrap = -1; wrap <= 1; ++wrap) {
        const double z = (h + 24.0 * wrap - mu_[c]) / sigma_[c];
        g += w_[c] * std::exp(-0.5 * z * z) / (sigma_[c] * std::sqrt(2.0 * std::numbers::pi));
      }
    return (1.0 - floor_) * g + floor_ / 24.0;
  }
  double max_density() const noexcept { return fmax_; }

  // Event times (seconds of day, ascending) of one day with expected count
  // `expected`, by thinning a homogeneous process.
  void sample_day(double expected, Rng& rng, std::vector<int>& out) const {
    out.clear();
    const double rate = expected * fmax_;  // candidates per hour
    if (!(rate > 0)) return;
    double t = rng.exponential(rate);
    while (t < 24.0) {
      if (rng.uniform() * fmax_ < density(t)) out.push_back(std::min(86399, static_cast<int>(t * 3600.0)));
      t += rng.exponential(rate);
    }
  }

  // One time drawn from the density, seconds of day.
  int sample_one(Rng& rng) const {
    while (true) {
      const double t = rng.uniform() * 24.0;
      if (rng.uniform() * fmax_ < density(t)) return std::min(86399, static_cast<int>(t * 3600.0));
    }
  }

 private:
  std::array<double, 2> mu_, sigma_, w_;
  double floor_;
  double fmax_ = 0.0;
};

// ---------------------------------------------------------------------------
// Corpus

struct Corpus {
  IdTable ids;  // individuals (ascending id) first, then off-net contacts
  std::vector<Event> events;  // sorted by ego, then time
  std::shared_ptr<const TowerRegistry> towers;
  Demographics demographics;
  GroundTruth truth;

  EventStore to_store() const {
    EventStore s;
    s.ids = ids;
    s.events = events;
    s.rows_read = events.size();
    return s;
  }
  EventStore take_store() {
    EventStore s;
    s.ids = std::move(ids);
    s.events = std::move(events);
    s.rows_read = s.events.size();
    return s;
  }
};

namespace detail {

struct Lattice {
  Region region;
  double step;
  std::uint32_t rows, cols;

  Lattice(const Region& r, double s)
      : region(r), step(s), rows(static_cast<std::uint32_t>(steps_in(r.lat_min, r.lat_max, s))),
        cols(static_cast<std::uint32_t>(steps_in(r.lon_min, r.lon_max, s))) {}

  std::uint32_t key(std::uint32_t i, std::uint32_t j) const noexcept { return i * cols + j; }
  LatLon center(std::uint32_t key) const noexcept {
    return {region.lat_min + (key / cols + 0.5) * step, region.lon_min + (key % cols + 0.5) * step};
  }
  std::uint32_t snap(LatLon p) const noexcept {
    const auto clampi = [](double v, std::uint32_t n) {
      return static_cast<std::uint32_t>(std::clamp(std::floor(v), 0.0, static_cast<double>(n - 1)));
    };
    return key(clampi((p.lat - region.lat_min) / step, rows), clampi((p.lon - region.lon_min) / step, cols));
  }
  std::string id(std::uint32_t key) const { return fmt::format("T{:04}_{:04}", key / cols, key % cols); }
};

struct EgoPlan {
  std::uint32_t home = 0;               // lattice key
  std::array<std::uint32_t, 4> satellites{};
  double rate = 0.0;                    // events per day before weekday/month factors
  double p_away = 0.0;
  int area = 0;
  std::vector<std::uint32_t> buddies;   // ego ids
};

}  // namespace detail

// Builds the whole corpus in memory. `threads` only affects speed.
inline Corpus generate(const GenConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const YearCalendar cal(cfg.year);
  const Circadian rhythm(cfg);
  const detail::Lattice lattice(cfg.region, cfg.tower_step);
  const GridSpec grid{cfg.cell_step, cfg.cell_step, {cfg.region.lat_min, cfg.region.lon_min}};
  const auto cell_rows = detail::steps_in(cfg.region.lat_min, cfg.region.lat_max, cfg.cell_step);
  const auto cell_cols = detail::steps_in(cfg.region.lon_min, cfg.region.lon_max, cfg.cell_step);
  const auto sub = static_cast<std::uint32_t>(std::llround(cfg.cell_step / cfg.tower_step));

  const std::size_t n = cfg.n_individuals;
  const auto n_spam = static_cast<std::size_t>(std::llround(cfg.spam_fraction * n / (1.0 - cfg.spam_fraction)));
  const std::size_t n_ids = n + n_spam;

  Rng setup(substream_seed(cfg.seed, 1, 0));

  // Identifiers: "u%06d" with spam ids scattered among genuine ones.
  std::vector<std::uint32_t> slot(n_ids);  // id number -> genuine index or n + spam index
  std::iota(slot.begin(), slot.end(), 0u);
  for (std::size_t k = n_ids; k > 1; --k) std::swap(slot[k - 1], slot[setup.below(k)]);
  std::vector<std::uint32_t> ego_of(n_ids);  // genuine/spam index -> interned id
  Corpus corpus;
  const int width = std::max<int>(6, static_cast<int>(std::to_string(n_ids).size()));
  for (std::size_t k = 0; k < n_ids; ++k) ego_of[slot[k]] = corpus.ids.intern(fmt::format("u{:0{}}", k, width));

  // Settlement cells with Zipf weights, then homes.
  std::vector<std::uint32_t> all_cells(cell_rows * cell_cols);
  std::iota(all_cells.begin(), all_cells.end(), 0u);
  for (std::size_t k = 0; k < cfg.n_cells; ++k)
    std::swap(all_cells[k], all_cells[k + setup.below(all_cells.size() - k)]);
  std::vector<double> cum(cfg.n_cells);
  double acc = 0.0;
  for (std::size_t r = 0; r < cfg.n_cells; ++r) cum[r] = acc += std::pow(static_cast<double>(r + 1), -cfg.zipf_s);
  std::vector<std::uint32_t> home_cell(n);
  std::vector<detail::EgoPlan> plan(n);
  std::unordered_map<std::uint32_t, std::uint32_t> cell_count;
  for (std::size_t e = 0; e < n; ++e) {
    const double u = setup.uniform() * acc;
    const auto r = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    home_cell[e] = all_cells[std::min(r, cfg.n_cells - 1)];
    ++cell_count[home_cell[e]];
  }

  // Realized density, its ranks and geometric mean.
  std::vector<std::uint32_t> inhabited;
  for (const auto& [c, cnt] : cell_count) inhabited.push_back(c);
  std::sort(inhabited.begin(), inhabited.end());
  const auto cell_index = [&](std::uint32_t c) {
    return CellIndex{static_cast<int>(c / cell_cols), static_cast<int>(c % cell_cols)};
  };
  std::vector<double> dens(inhabited.size());
  double log_sum = 0.0;
  for (std::size_t k = 0; k < inhabited.size(); ++k) {
    dens[k] = cell_count[inhabited[k]] / cell_area_km2(cell_index(inhabited[k]), grid);
    log_sum += std::log(dens[k]);
  }
  const double rho_bar = std::exp(log_sum / static_cast<double>(inhabited.size()));
  const auto ranks = descending_ranks(dens);
  std::unordered_map<std::uint32_t, std::size_t> cell_slot;
  for (std::size_t k = 0; k < inhabited.size(); ++k) cell_slot[inhabited[k]] = k;
  double flip_density = 0.0;
  if (cfg.flip_rank > 0) {
    std::vector<double> sorted = dens;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    flip_density = sorted[std::min(cfg.flip_rank, sorted.size()) - 1];
  }
  const AreaBounds bounds{cfg.area_bounds};

  // Individual plans.
  GroundTruth& truth = corpus.truth;
  truth.config = cfg;
  truth.grid = grid;
  truth.egos.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    Rng rng(substream_seed(cfg.seed, 2, e));
    auto& p = plan[e];
    auto& t = truth.egos[e];
    const std::uint32_t c = home_cell[e];
    const std::size_t cs = cell_slot[c];
    const double rho = dens[cs];
    t.id = corpus.ids.name(ego_of[e]);
    t.cell = cell_index(c);
    t.density = rho;
    t.density_rank = ranks[cs];
    t.area = bounds.area_of(t.density_rank);
    p.area = t.area;
    p.home = lattice.key(static_cast<std::uint32_t>(t.cell.i) * sub + static_cast<std::uint32_t>(rng.below(sub)),
                         static_cast<std::uint32_t>(t.cell.j) * sub + static_cast<std::uint32_t>(rng.below(sub)));
    t.home = lattice.center(p.home);

    t.gender = rng.bernoulli(cfg.female_fraction) ? Gender::female : Gender::male;
    t.age = cfg.age_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.age_max - cfg.age_min + 1)));
    t.in_demographics = rng.bernoulli(cfg.demographics_fraction);
    const AgeGroup group = age_group_of(t.age);

    double coupling = std::pow(rho / rho_bar, cfg.beta);
    if (cfg.flip_rank > 0 && rho >= flip_density)
      coupling = std::pow(flip_density / rho_bar, cfg.beta) * std::pow(rho / flip_density, cfg.beta_dense);
    double gender_factor = 1.0;
    if (t.gender == Gender::female)
      gender_factor += cfg.female_activity_excess[static_cast<std::size_t>(t.area)] *
                       (group == AgeGroup::teen ? cfg.teen_gap_factor : 1.0);
    const double hetero = std::exp(cfg.rate_sigma * rng.normal() - 0.5 * cfg.rate_sigma * cfg.rate_sigma);
    p.rate = cfg.rate_per_day * coupling * gender_factor * cfg.age_activity[static_cast<std::size_t>(group)] * hetero;
    t.rate_per_day = p.rate;
    p.p_away = cfg.p_away * (t.gender == Gender::female ? cfg.female_mobility : 1.0);

    const double scale = cfg.lambda0_km * std::pow(rho / rho_bar, -cfg.gamma);
    t.satellite_scale_km = scale;
    for (std::size_t k = 0; k < p.satellites.size(); ++k) {
      auto& s = p.satellites[k];
      const double d = scale * cfg.satellite_distances[k] * std::exp(cfg.satellite_jitter * rng.normal());
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
      const LatLon q{t.home.lat + d * std::cos(theta) / km_per_deg,
                     t.home.lon + d * std::sin(theta) / (km_per_deg * std::cos(deg2rad(t.home.lat)))};
      s = lattice.snap(q);
    }
    if (n > 1)
      for (std::size_t b = 0; b < cfg.buddies; ++b) {
        auto other = static_cast<std::uint32_t>(rng.below(n - 1));
        if (other >= e) ++other;
        p.buddies.push_back(other);
      }
  }

  // Off-net contacts are interned after every individual.
  const std::uint32_t contact_base = static_cast<std::uint32_t>(corpus.ids.size());
  for (std::size_t e = 0; e < n; ++e)
    for (std::size_t k = 0; k < cfg.contacts; ++k)
      corpus.ids.intern(fmt::format("c{:08}", e * cfg.contacts + k));
  const auto contact_of = [&](std::size_t e, std::size_t k) {
    return contact_base + static_cast<std::uint32_t>(e * cfg.contacts + k);
  };

  const auto night = [&](int sec) {
    const double h = sec / 3600.0;
    return h >= cfg.night_start && h < cfg.night_end;
  };
  const auto locate = [&](const detail::EgoPlan& p, int sec, int month, Rng& rng) {
    const bool away = night(sec) ? !rng.bernoulli(cfg.p_home_night)
                                 : rng.bernoulli(std::min(1.0, p.p_away * cfg.month_mobility[static_cast<std::size_t>(month)]));
    return away ? p.satellites[rng.pick(cfg.satellite_weights)] : p.home;
  };
  const auto kind_of = [&](Rng& rng) { return rng.bernoulli(cfg.call_fraction) ? Kind::call : Kind::sms; };
  const auto flip = [](Direction d) { return d == Direction::outgoing ? Direction::incoming : Direction::outgoing; };

  // Events per individual, in parallel; each individual also writes the rows
  // its on-net partners see.
  std::vector<std::vector<Event>> rows(n);
  parallel_for(n, threads, [&](std::size_t e) {
    Rng rng(substream_seed(cfg.seed, 3, e));
    const auto& p = plan[e];
    auto& out = rows[e];
    std::vector<int> secs;
    const std::uint32_t me = ego_of[e];
    std::vector<std::size_t> offnet;  // indices into out of own off-net rows
    for (int d = 0; d < cal.days(); ++d) {
      const int month = cal.month_of_day(d);
      const double expected = p.rate * cfg.weekday[static_cast<std::size_t>(cal.weekday_of_day(d))] *
                              cfg.month_activity[static_cast<std::size_t>(p.area)][static_cast<std::size_t>(month)];
      rhythm.sample_day(expected, rng, secs);
      for (int s : secs) {
        const std::int64_t ts = cal.day_start(d) + s;
        const Kind kind = kind_of(rng);
        const Direction dir = rng.bernoulli(0.5) ? Direction::outgoing : Direction::incoming;
        const std::uint32_t where = locate(p, s, month, rng);
        if (!p.buddies.empty() && rng.bernoulli(cfg.onnet_fraction)) {
          const std::uint32_t b = p.buddies[rng.below(p.buddies.size())];
          out.push_back(Event{ts, me, ego_of[b], where, kind, dir});
          out.push_back(Event{ts, ego_of[b], me, locate(plan[b], s, month, rng), kind, flip(dir)});
        } else {
          offnet.push_back(out.size());
          out.push_back(Event{ts, me, contact_of(e, rng.below(cfg.contacts)), where, kind, dir});
        }
      }
    }
    // Reciprocity by construction: one contact seen in both directions.
    while (offnet.size() < 2) {
      const int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(cal.days())));
      const int s = rhythm.sample_one(rng);
      offnet.push_back(out.size());
      out.push_back(Event{cal.day_start(d) + s, me, contact_of(e, 0), locate(p, s, cal.month_of_day(d), rng),
                          kind_of(rng), Direction::outgoing});
    }
    std::vector<std::uint8_t> dirs(cfg.contacts, 0);
    for (std::size_t k : offnet) dirs[out[k].peer - contact_of(e, 0)] |= out[k].direction == Direction::incoming ? 1 : 2;
    if (std::find(dirs.begin(), dirs.end(), 3) == dirs.end()) {
      out[offnet[0]].peer = contact_of(e, 0);
      out[offnet[0]].direction = Direction::outgoing;
      out[offnet[1]].peer = contact_of(e, 0);
      out[offnet[1]].direction = Direction::incoming;
    }
  });

  // Spam ids: their own tower, outgoing only, towards random individuals.
  std::vector<Event> spam_rows;
  for (std::size_t k = 0; k < n_spam; ++k) {
    Rng rng(substream_seed(cfg.seed, 4, k));
    const std::uint32_t me = ego_of[n + k];
    truth.spam_ids.push_back(corpus.ids.name(me));
    const std::uint32_t tower = lattice.snap(
        {cfg.region.lat_min + rng.uniform() * (cfg.region.lat_max - cfg.region.lat_min),
         cfg.region.lon_min + rng.uniform() * (cfg.region.lon_max - cfg.region.lon_min)});
    std::vector<int> secs;
    bool any = false;
    for (int d = 0; d < cal.days() || !any; ++d) {
      const int day = d % cal.days();
      if (d < cal.days()) rhythm.sample_day(cfg.spam_rate_per_day, rng, secs);
      else secs.assign(1, rhythm.sample_one(rng));
      for (int s : secs) {
        any = true;
        const auto target = rng.below(n);
        const std::int64_t ts = cal.day_start(day) + s;
        const Kind kind = kind_of(rng);
        spam_rows.push_back(Event{ts, me, ego_of[target], tower, kind, Direction::outgoing});
        spam_rows.push_back(Event{ts, ego_of[target], me, locate(plan[target], s, cal.month_of_day(day), rng), kind,
                                  Direction::incoming});
      }
    }
  }
  std::sort(truth.spam_ids.begin(), truth.spam_ids.end());

  // Merge, order by (ego, time, ...) and resolve lattice keys to tower indices.
  std::size_t total = spam_rows.size();
  for (const auto& r : rows) total += r.size();
  auto& events = corpus.events;
  events.reserve(total);
  for (auto& r : rows) {
    events.insert(events.end(), r.begin(), r.end());
    std::vector<Event>().swap(r);
  }
  events.insert(events.end(), spam_rows.begin(), spam_rows.end());
  std::vector<Event>().swap(spam_rows);
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.ego != b.ego) return a.ego < b.ego;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.tower != b.tower) return a.tower < b.tower;
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.direction != b.direction) return a.direction < b.direction;
    return a.peer < b.peer;
  });
  std::vector<std::uint32_t> keys;
  keys.reserve(events.size());
  for (const auto& ev : events) keys.push_back(ev.tower);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::pair<std::string, LatLon>> entries;
  entries.reserve(keys.size());
  for (auto k : keys) entries.emplace_back(lattice.id(k), lattice.center(k));
  auto towers = std::make_shared<TowerRegistry>(std::move(entries));
  for (auto& ev : events)
    ev.tower = static_cast<std::uint32_t>(std::lower_bound(keys.begin(), keys.end(), ev.tower) - keys.begin());
  corpus.towers = std::move(towers);

  std::sort(truth.egos.begin(), truth.egos.end(), [](const TrueEgo& a, const TrueEgo& b) { return a.id < b.id; });
  for (const auto& t : truth.egos)
    if (t.in_demographics) corpus.demographics.entries.emplace(t.id, Person{t.gender, t.age});
  return corpus;
}

// ---------------------------------------------------------------------------
// Files

inline void write_cdr_csv(const std::string& path, const Corpus& c) {
  CsvWriter w(path);
  w.line(kCdrHeader);
  for (const auto& e : c.events) {
    append_event_line(w.buffer(), c.ids.name(e.ego), c.ids.name(e.peer), e.timestamp, c.towers->id(e.tower), e.kind,
                      e.direction);
    w.maybe_flush();
  }
  w.close();
}

inline void write_towers_csv(const std::string& path, const TowerRegistry& towers) {
  CsvWriter w(path);
  w.line("tower_id,lat,lon");
  for (std::uint32_t k = 0; k < towers.size(); ++k) {
    auto& b = w.buffer();
    b += towers.id(k);
    b += ',';
    append_double(b, towers.position(k).lat);
    b += ',';
    append_double(b, towers.position(k).lon);
    b += '\n';
    w.maybe_flush();
  }
  w.close();
}

inline void write_demographics_csv(const std::string& path, const Demographics& d) {
  CsvWriter w(path);
  w.line("ego_id,gender,age");
  for (const auto& [id, p] : d.entries) {
    auto& b = w.buffer();
    b += id;
    b += ',';
    b += to_string(p.gender);
    b += ',';
    b += std::to_string(p.age);
    b += '\n';
    w.maybe_flush();
  }
  w.close();
}

struct CorpusFiles {
  std::filesystem::path cdr, towers, demographics, truth, config;
  explicit CorpusFiles(const std::filesystem::path& dir)
      : cdr(dir / "cdr.csv"), towers(dir / "towers.csv"), demographics(dir / "demographics.csv"),
        truth(dir / "truth.json"), config(dir / "config.json") {}
};

inline CorpusFiles write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CorpusFiles f(dir);
  write_cdr_csv(f.cdr.string(), c);
  write_towers_csv(f.towers.string(), *c.towers);
  write_demographics_csv(f.demographics.string(), c.demographics);
  write_json_file(f.truth.string(), to_json(c.truth));
  write_json_file(f.config.string(), nlohmann::ordered_json(nlohmann::json(c.truth.config)));
  return f;
}

inline GenConfig load_gen_config(const std::string& path) {
  auto in = open_input(path);
  try {
    nlohmann::json j;
    in >> j;
    return j.get<GenConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Planted rank-size grid: `total` homes spread over `n_cells` cells with
// probabilities proportional to rank^-s.

inline GridDensity planted_zipf_grid(std::size_t n_cells, double s, std::uint64_t total, std::uint64_t seed,
                                     const Region& region = {}, double step = 0.05) {
  const auto rows = detail::steps_in(region.lat_min, region.lat_max, step);
  const auto cols = detail::steps_in(region.lon_min, region.lon_max, step);
  if (n_cells == 0 || n_cells > rows * cols) throw std::invalid_argument("planted grid: bad cell count");
  Rng rng(substream_seed(seed, 5, 0));
  std::vector<std::uint32_t> cells(rows * cols);
  std::iota(cells.begin(), cells.end(), 0u);
  for (std::size_t k = 0; k < n_cells; ++k) std::swap(cells[k], cells[k + rng.below(cells.size() - k)]);
  std::vector<double> cum(n_cells);
  double acc = 0.0;
  for (std::size_t r = 0; r < n_cells; ++r) cum[r] = acc += std::pow(static_cast<double>(r + 1), -s);
  std::vector<std::uint32_t> counts(n_cells, 0);
  for (std::uint64_t k = 0; k < total; ++k) {
    const auto r = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), rng.uniform() * acc) - cum.begin());
    ++counts[std::min(r, n_cells - 1)];
  }
  GridDensity g;
  g.spec = GridSpec{step, step, {region.lat_min, region.lon_min}};
  for (std::size_t r = 0; r < n_cells; ++r)
    if (counts[r]) g.counts[{static_cast<int>(cells[r] / cols), static_cast<int>(cells[r] % cols)}] = counts[r];
  g.total = total;
  return g;
}

}  // namespace cdrmob
