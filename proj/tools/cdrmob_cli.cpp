// cdrmob command line: one subcommand per pipeline stage plus `report`,
// which runs them all. Exit codes: 0 ok, 1 usage, 2 data error, 3 failed
// validation checks.

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "cdrmob/cdrmob.hpp"

namespace fs = std::filesystem;
using namespace cdrmob;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitChecks = 3;

struct Options {
  std::string cdr, towers, demographics, spool, homes, truth, config, out;
  std::string metrics_year, metrics_month, metrics_day, metrics_hour;
  std::vector<std::string> windows;
  std::string area_bounds = "30,100,1000,10000";
  std::string night_window;
  std::string filter_rule = "per_pair";
  std::string normalization = "activity";
  double grid_step = 0.05;
  double fine_step = 0.01;
  double window_hours = 6.0;
  int year = 2008;
  int profile_bin = 60;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::size_t spool_parts = 4;
  bool no_filter = false;
  bool exclude_at_sea = false;
  bool plot_data = false;
};

// Outputs go to a staging directory and are moved into place only when the
// whole command succeeded, so a failed run leaves nothing behind.
class OutputDir {
 public:
  explicit OutputDir(const fs::path& final_dir) : final_(final_dir) {
    if (final_.empty()) throw UsageError("--out is required");
    if (fs::exists(final_) && !fs::is_directory(final_)) throw DataError("--out is not a directory: " + final_.string());
    created_ = fs::create_directories(final_);
    staging_ = final_ / (".partial-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
    if (!committed_ && created_ && fs::is_empty(final_, ec)) fs::remove(final_, ec);
  }

  std::string file(const std::string& name) {
    manifest.outputs.emplace_back(name);
    return (staging_ / name).string();
  }
  fs::path staging() const { return staging_; }

  void commit() {
    manifest.write(staging_);
    for (const auto& entry : fs::directory_iterator(staging_)) {
      const auto target = final_ / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
    committed_ = true;
  }

  RunManifest manifest;

 private:
  fs::path final_, staging_;
  bool created_ = false;
  bool committed_ = false;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig c;
  c.year = o.year;
  if (!(o.grid_step > 0) || !(o.fine_step > 0)) throw UsageError("grid steps must be positive");
  c.grid_step = o.grid_step;
  c.fine_step = o.fine_step;
  try {
    c.area_bounds = AreaBounds::parse(o.area_bounds);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--area-bounds: ") + e.what());
  }
  if (!o.night_window.empty()) {
    c.night_window = InactiveWindow::parse(o.night_window);
    if (!c.night_window) throw UsageError("--night-window must look like HH:MM-HH:MM");
  }
  if (!(o.window_hours > 0 && o.window_hours < 24)) throw UsageError("--window-hours must be in (0, 24)");
  c.window_hours = o.window_hours;
  if (o.profile_bin <= 0 || 1440 % o.profile_bin != 0) throw UsageError("--profile-bin must divide 1440");
  c.profile_bin_minutes = o.profile_bin;
  c.filter.enabled = !o.no_filter;
  if (o.filter_rule == "per_pair") c.filter.rule = ReciprocityRule::per_pair;
  else if (o.filter_rule == "in_and_out") c.filter.rule = ReciprocityRule::in_and_out;
  else throw UsageError("--filter-rule must be per_pair or in_and_out");
  if (o.normalization == "activity") c.normalization = MobilityNormalization::by_activity;
  else if (o.normalization == "pairs") c.normalization = MobilityNormalization::by_pairs;
  else throw UsageError("--normalization must be activity or pairs");
  c.exclude_at_sea = o.exclude_at_sea;
  c.threads = std::max(1u, o.threads);
  return c;
}

struct Loaded {
  Timelines timelines;
  std::optional<IngestStats> stats;
  std::vector<std::string> removed;
};

EventStore read_store(const Options& o, const TowerRegistry& towers, const PipelineConfig& cfg) {
  IngestOptions io;
  io.year = cfg.year;
  io.threads = cfg.threads;
  return read_cdr_file(o.cdr, towers, io);
}

// Timelines from --spool, or from --cdr and --towers through the filter.
Loaded load_timelines(const Options& o, const PipelineConfig& cfg, RunManifest& m) {
  Loaded l;
  if (!o.spool.empty()) {
    if (!o.cdr.empty()) throw UsageError("give either --spool or --cdr, not both");
    l.timelines = read_spool(o.spool);
    m.inputs.emplace_back(fs::path(o.spool) / "spool.json");
  } else {
    require(o.cdr, "--cdr");
    require(o.towers, "--towers");
    auto towers = std::make_shared<const TowerRegistry>(load_towers(o.towers));
    auto r = ingest(read_store(o, *towers, cfg), towers, cfg.filter, cfg.threads);
    l.timelines = std::move(r.timelines);
    l.stats = r.stats;
    l.removed = std::move(r.removed_unilateral);
    m.inputs.emplace_back(o.cdr);
    m.inputs.emplace_back(o.towers);
    m.ingest_stats = to_json(r.stats);
  }
  if (l.timelines.empty()) throw DataError("no surviving individuals");
  return l;
}

Population population(const Options& o, const PipelineConfig& cfg, RunManifest& m, Loaded& l) {
  if (!o.homes.empty()) {
    m.inputs.emplace_back(o.homes);
    return population_from_table(l.timelines, read_homes_csv(o.homes));
  }
  const auto stage = detect_homes(l.timelines, cfg);
  return homed_population(l.timelines, stage.homes, cfg.exclude_at_sea);
}

MetricTable metric_table(const std::string& path, const char* flag, int year, RunManifest& m) {
  require(path, flag);
  m.inputs.emplace_back(path);
  return read_metrics_csv(path, year);
}

// Homes plus the whole-year metric table, the inputs of the density stages.
struct DensityInputs {
  HomeTable homes;
  MetricTable year;
};

DensityInputs density_inputs(const Options& o, const PipelineConfig& cfg, RunManifest& m) {
  require(o.homes, "--homes");
  m.inputs.emplace_back(o.homes);
  DensityInputs d{read_homes_csv(o.homes), metric_table(o.metrics_year, "--metrics-year", cfg.year, m)};
  if (d.year.spec.granularity != Granularity::whole_year)
    throw DataError("--metrics-year must hold whole-year metric rows");
  if (d.year.egos != d.homes.egos)
    throw DataError("the year metrics file does not list the same individuals as the homes file");
  return d;
}

void print_done(const std::string& cmd, const OutputDir& out, const Options& o) {
  std::cout << cmd << ": wrote " << out.manifest.outputs.size() + 1 << " files to " << o.out << "\n";
}

// ---------------------------------------------------------------------------

int cmd_generate(const Options& o) {
  GenConfig g;
  OutputDir out(o.out);
  if (!o.config.empty()) {
    g = load_gen_config(o.config);
    out.manifest.inputs.emplace_back(o.config);
  }
  if (o.n) g.n_individuals = *o.n;
  if (o.seed) g.seed = *o.seed;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("generator config: ") + e.what());
  }
  Stopwatch sw;
  const Corpus c = generate(g, o.threads);
  out.manifest.timings["generate"] = sw.seconds();
  write_corpus(c, out.staging());
  for (const char* f : {"cdr.csv", "towers.csv", "demographics.csv", "truth.json", "config.json"})
    out.manifest.outputs.emplace_back(f);
  out.manifest.subcommand = "generate";
  out.manifest.config = nlohmann::ordered_json(nlohmann::json(g));
  out.commit();
  std::cout << "generate: " << c.events.size() << " rows, " << c.truth.egos.size() << " individuals, "
            << c.truth.spam_ids.size() << " one-way ids -> " << o.out << "\n";
  return kExitOk;
}

int cmd_ingest(const Options& o) {
  const auto cfg = pipeline_config(o);
  if (!o.spool.empty()) throw UsageError("ingest reads --cdr and --towers");
  OutputDir out(o.out);
  Stopwatch sw;
  auto l = load_timelines(o, cfg, out.manifest);
  out.manifest.timings["ingest"] = sw.seconds();
  const auto spool_dir = out.staging() / "spool";
  for (const auto& p : write_spool(l.timelines, spool_dir, o.spool_parts))
    out.manifest.outputs.push_back(fs::path("spool") / fs::path(p).filename());
  write_json_file(out.file("ingest_stats.json"), to_json(*l.stats));
  CsvWriter w(out.file("removed_ids.txt"));
  for (const auto& id : l.removed) w.line(id);
  w.close();
  out.manifest.subcommand = "ingest";
  out.manifest.config = cfg.to_json();
  out.commit();
  print_done("ingest", out, o);
  return kExitOk;
}

int cmd_homes(const Options& o) {
  const auto cfg = pipeline_config(o);
  OutputDir out(o.out);
  Stopwatch sw;
  auto l = load_timelines(o, cfg, out.manifest);
  const auto stage = detect_homes(l.timelines, cfg);
  const auto pop = homed_population(l.timelines, stage.homes, cfg.exclude_at_sea);
  out.manifest.timings["homes"] = sw.seconds();
  write_profile_csv(out.file("profile_activity.csv"), stage.activity);
  write_profile_csv(out.file("profile_mobility.csv"), stage.mobility);
  write_json_file(out.file("fit.json"), fits_json(stage));
  write_homes_csv(out.file("homes.csv"), pop.timelines.ego_ids(), pop.homes);
  out.manifest.subcommand = "homes";
  out.manifest.config = cfg.to_json();
  out.commit();
  std::cout << "homes: window " << stage.window.label() << ", " << pop.homes.size() << " homes -> " << o.out << "\n";
  return kExitOk;
}

int cmd_metrics(const Options& o) {
  const auto cfg = pipeline_config(o);
  std::vector<Granularity> grans;
  for (const auto& w : o.windows.empty() ? std::vector<std::string>{"year", "month", "day", "hour"} : o.windows) {
    const auto g = parse_granularity(w);
    if (!g) throw UsageError("--window must be one of hour, day, dow, month, year");
    grans.push_back(*g);
  }
  OutputDir out(o.out);
  Stopwatch sw;
  auto l = load_timelines(o, cfg, out.manifest);
  const auto pop = population(o, cfg, out.manifest, l);
  l.timelines = Timelines{};
  out.manifest.timings["load"] = sw.seconds();
  sw = Stopwatch();
  for (const auto g : grans) {
    const WindowSpec spec{g, cfg.year, {}};
    write_metrics_csv(out.file(fmt::format("metrics_{}.csv", granularity_name(g))), pop, spec, cfg);
  }
  out.manifest.timings["metrics"] = sw.seconds();
  out.manifest.subcommand = "metrics";
  out.manifest.config = cfg.to_json();
  out.commit();
  print_done("metrics", out, o);
  return kExitOk;
}

// density, areas and correlate share one computation and differ in outputs.
int cmd_density_family(const Options& o, const std::string& which) {
  const auto cfg = pipeline_config(o);
  OutputDir out(o.out);
  Stopwatch sw;
  const auto in = density_inputs(o, cfg, out.manifest);
  const auto d = analyse_density(in.homes.homes, in.year.rows, cfg);
  out.manifest.timings[which] = sw.seconds();
  if (which == "density") {
    write_grid_csv(out.file("grid.csv"), d.ranked, d.areas);
    write_rank_size_csv(out.file("rank_size.csv"), d.rank_size);
    write_json_file(out.file("density.json"), density_json(d));
  } else if (which == "areas") {
    write_grid_csv(out.file("grid.csv"), d.ranked, d.areas);
    write_area_csv(out.file("areas.csv"), d.area_table);
  } else {
    write_bands_csv(out.file("correlation_bands.csv"), d.bands);
    const auto j = density_json(d);
    nlohmann::ordered_json c;
    for (const char* k : {"inhabited_cells", "rho_R_A", "rho_R_M", "rho_R_Rg", "reference", "sign_change_rank"}) c[k] = j[k];
    write_json_file(out.file("correlation.json"), c);
  }
  if (o.plot_data)
    for (const auto& n : write_density_plot_data(out.staging() / "plot", d)) {
      const bool bands = n.rfind("bands_", 0) == 0;
      if ((which == "correlate") == bands) out.manifest.outputs.push_back(fs::path("plot") / n);
      else fs::remove(out.staging() / "plot" / n);
    }
  out.manifest.subcommand = which;
  out.manifest.config = cfg.to_json();
  out.commit();
  print_done(which, out, o);
  return kExitOk;
}

int cmd_patterns(const Options& o) {
  const auto cfg = pipeline_config(o);
  OutputDir out(o.out);
  Stopwatch sw;
  const auto in = density_inputs(o, cfg, out.manifest);
  const auto month = metric_table(o.metrics_month, "--metrics-month", cfg.year, out.manifest);
  const auto day = metric_table(o.metrics_day, "--metrics-day", cfg.year, out.manifest);
  const auto hour = metric_table(o.metrics_hour, "--metrics-hour", cfg.year, out.manifest);
  std::optional<Demographics> demo;
  if (!o.demographics.empty()) {
    demo = load_demographics(o.demographics, cfg.year);
    out.manifest.inputs.emplace_back(o.demographics);
  }
  const auto m = metric_inputs_from_tables(in.homes.egos, in.year, month, day, hour);
  const auto d = analyse_density(in.homes.homes, m.year, cfg);
  const auto cohorts = ego_cohorts(in.homes.egos, d.ego_area, demo ? &*demo : nullptr);
  const auto p = analyse_patterns(m, cohorts);
  out.manifest.timings["patterns"] = sw.seconds();
  write_patterns_csv(out.file("patterns.csv"), p);
  write_json_file(out.file("patterns.json"), patterns_json(p));
  write_gender_diff_csv(out.file("gender_diff.csv"), p.diffs);
  if (o.plot_data) {
    std::vector<PatternSeries> all(p.area_series);
    all.insert(all.end(), p.gender_series.begin(), p.gender_series.end());
    write_plot_data(out.staging() / "plot", all);
    for (const auto& s : all) out.manifest.outputs.push_back(fs::path("plot") / (series_file_stem(s) + ".dat"));
  }
  out.manifest.subcommand = "patterns";
  out.manifest.config = cfg.to_json();
  out.commit();
  print_done("patterns", out, o);
  return kExitOk;
}

ReportResult run_report_from_files(const Options& o, const PipelineConfig& cfg, RunManifest& m) {
  require(o.cdr, "--cdr");
  require(o.towers, "--towers");
  if (!o.spool.empty()) throw UsageError("report reads --cdr and --towers");
  auto towers = std::make_shared<const TowerRegistry>(load_towers(o.towers));
  std::optional<Demographics> demo;
  if (!o.demographics.empty()) demo = load_demographics(o.demographics, cfg.year);
  Stopwatch sw;
  auto store = read_store(o, *towers, cfg);
  const double read_s = sw.seconds();
  auto r = run_report(std::move(store), towers, demo ? &*demo : nullptr, cfg);
  r.timings["read"] = read_s;
  m.inputs.emplace_back(o.cdr);
  m.inputs.emplace_back(o.towers);
  if (demo) m.inputs.emplace_back(o.demographics);
  m.ingest_stats = to_json(r.stats);
  m.timings = r.timings;
  return r;
}

int cmd_report(const Options& o) {
  const auto cfg = pipeline_config(o);
  OutputDir out(o.out);
  const auto r = run_report_from_files(o, cfg, out.manifest);
  out.manifest.outputs = write_report(r, out.staging(), o.plot_data);
  out.manifest.subcommand = "report";
  out.manifest.config = cfg.to_json();
  out.commit();
  std::cout << "report: window " << r.home.window.label() << ", " << r.population.timelines.size()
            << " individuals -> " << o.out << "\n";
  return kExitOk;
}

int print_scorecard(const Scorecard& card) {
  for (const auto& c : card.checks) {
    const char* status = !c.pass ? "INFO" : *c.pass ? "PASS" : "FAIL";
    std::cout << fmt::format("{:<5} {:<28} {:<14} expected {}{}\n", status, c.name,
                             c.value ? fmt::format("{:.6g}", *c.value) : "-", c.expected,
                             c.detail.empty() ? "" : "  (" + c.detail + ")");
  }
  return card.all_pass() ? kExitOk : kExitChecks;
}

int cmd_validate(const Options& o) {
  const auto cfg = pipeline_config(o);
  require(o.truth, "--truth");
  OutputDir out(o.out);
  const auto truth = load_ground_truth(o.truth);
  const auto r = run_report_from_files(o, cfg, out.manifest);
  out.manifest.inputs.emplace_back(o.truth);
  const auto card = validate_corpus(r, truth);
  write_json_file(out.file("scorecard.json"), to_json(card));
  write_json_file(out.file("summary.json"), summary_json(r));
  out.manifest.subcommand = "validate";
  out.manifest.config = cfg.to_json();
  out.commit();
  return print_scorecard(card);
}

int cmd_demo(const Options& o) {
  const auto cfg = pipeline_config(o);
  GenConfig g;
  if (o.n) g.n_individuals = *o.n;
  if (o.seed) g.seed = *o.seed;
  OutputDir out(o.out);
  Stopwatch sw;
  Corpus c = generate(g, cfg.threads);
  out.manifest.timings["generate"] = sw.seconds();
  const auto corpus_dir = out.staging() / "corpus";
  write_corpus(c, corpus_dir);
  for (const char* f : {"cdr.csv", "towers.csv", "demographics.csv", "truth.json", "config.json"})
    out.manifest.outputs.push_back(fs::path("corpus") / f);
  const auto truth = c.truth;
  const auto demo = c.demographics;
  const auto towers = c.towers;
  sw = Stopwatch();
  const auto r = run_report(c.take_store(), towers, &demo, cfg);
  out.manifest.timings["report"] = sw.seconds();
  fs::create_directories(out.staging() / "report");
  for (const auto& p : write_report(r, out.staging() / "report", o.plot_data)) out.manifest.outputs.push_back("report" / p);
  const auto card = validate_corpus(r, truth);
  write_json_file(out.file("scorecard.json"), to_json(card));
  out.manifest.subcommand = "demo";
  out.manifest.config = {{"generator", nlohmann::json(g)}, {"pipeline", cfg.to_json()}};
  out.commit();
  return print_scorecard(card);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdrmob: mobility and communication analysis of call detail records"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 usage error, 2 data error, 3 validation checks failed.");
  Options o;

  const auto input = [&](CLI::App* s, bool spool) {
    s->add_option("--cdr", o.cdr, "CDR file: ego_id,peer_id,timestamp,tower_id,kind,direction");
    s->add_option("--towers", o.towers, "tower file: tower_id,lat,lon");
    if (spool) s->add_option("--spool", o.spool, "spool directory written by `ingest` (instead of --cdr/--towers)");
  };
  const auto pipeline = [&](CLI::App* s) {
    s->add_option("--year", o.year, "analysis year")->capture_default_str();
    s->add_option("--threads", o.threads, "worker threads (results do not depend on it)")->capture_default_str();
    s->add_flag("--no-filter", o.no_filter, "keep individuals without reciprocal communication");
    s->add_option("--filter-rule", o.filter_rule, "per_pair or in_and_out")->capture_default_str();
    s->add_option("--grid-step", o.grid_step, "analysis grid step, degrees")->capture_default_str();
    s->add_option("--fine-step", o.fine_step, "fine grid step for area densities, degrees")->capture_default_str();
    s->add_option("--area-bounds", o.area_bounds, "upper density ranks of Areas 1-4: r1,r2,r3,r4")->capture_default_str();
    s->add_option("--night-window", o.night_window, "override the detected inactivity window, HH:MM-HH:MM");
    s->add_option("--window-hours", o.window_hours, "inactivity window width")->capture_default_str();
    s->add_option("--profile-bin", o.profile_bin, "daily profile bin, minutes")->capture_default_str();
    s->add_option("--normalization", o.normalization, "mobility normalization: activity (1/A) or pairs")->capture_default_str();
    s->add_flag("--exclude-at-sea", o.exclude_at_sea, "drop homes in cells without a tower");
  };
  const auto out = [&](CLI::App* s) { s->add_option("--out", o.out, "output directory")->required(); };

  std::vector<std::pair<CLI::App*, std::function<int()>>> commands;
  const auto command = [&](const char* name, const char* help, std::function<int()> fn) {
    auto* s = app.add_subcommand(name, help);
    commands.emplace_back(s, std::move(fn));
    return s;
  };

  auto* gen = command("generate", "write a synthetic corpus with its ground truth", [&] { return cmd_generate(o); });
  gen->add_option("--n", o.n, "number of individuals");
  gen->add_option("--seed", o.seed, "master seed");
  gen->add_option("--config", o.config, "generator config JSON");
  gen->add_option("--threads", o.threads, "worker threads");
  out(gen);

  auto* ing = command("ingest", "parse and filter a CDR file into a timeline spool", [&] { return cmd_ingest(o); });
  input(ing, false);
  pipeline(ing);
  ing->add_option("--spool-parts", o.spool_parts, "number of spool part files")->capture_default_str();
  out(ing);

  auto* hom = command("homes", "daily profiles, bimodal fit, inactivity window and homes", [&] { return cmd_homes(o); });
  input(hom, true);
  pipeline(hom);
  out(hom);

  auto* met = command("metrics", "activity, mobility and radius of gyration per window", [&] { return cmd_metrics(o); });
  input(met, true);
  pipeline(met);
  met->add_option("--homes", o.homes, "homes.csv from `homes` (detected when omitted)");
  met->add_option("--window", o.windows, "hour, day, dow, month or year; repeatable (default year,month,day,hour)")
      ->delimiter(',');
  out(met);

  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"density", "home density grid, rank-size fit"},
           {"areas", "density-rank areas and their summary"},
           {"correlate", "rank correlations of density with the metrics"}}) {
    auto* s = command(name.c_str(), help.c_str(), [&o, name] { return cmd_density_family(o, name); });
    s->add_option("--homes", o.homes, "homes.csv")->required();
    s->add_option("--metrics-year", o.metrics_year, "metrics_year.csv")->required();
    pipeline(s);
    s->add_flag("--plot-data", o.plot_data, "also write two-column plot files");
    out(s);
  }

  auto* pat = command("patterns", "daily, weekly and seasonal series by area, gender and age", [&] { return cmd_patterns(o); });
  pat->add_option("--homes", o.homes, "homes.csv")->required();
  pat->add_option("--metrics-year", o.metrics_year, "metrics_year.csv")->required();
  pat->add_option("--metrics-month", o.metrics_month, "metrics_month.csv")->required();
  pat->add_option("--metrics-day", o.metrics_day, "metrics_day.csv")->required();
  pat->add_option("--metrics-hour", o.metrics_hour, "metrics_hour.csv")->required();
  pat->add_option("--demographics", o.demographics, "demographics file: ego_id,gender,age");
  pipeline(pat);
  pat->add_flag("--plot-data", o.plot_data, "also write two-column plot files");
  out(pat);

  auto* rep = command("report", "run every stage and write all outputs with a summary", [&] { return cmd_report(o); });
  input(rep, false);
  rep->add_option("--demographics", o.demographics, "demographics file: ego_id,gender,age");
  pipeline(rep);
  rep->add_flag("--plot-data", o.plot_data, "also write two-column plot files");
  out(rep);

  auto* val = command("validate", "run the report on a generated corpus and score it against its truth",
                      [&] { return cmd_validate(o); });
  input(val, false);
  val->add_option("--demographics", o.demographics, "demographics file");
  val->add_option("--truth", o.truth, "truth.json from `generate`")->required();
  pipeline(val);
  out(val);

  auto* dem = command("demo", "generate, report and validate in one go", [&] { return cmd_demo(o); });
  dem->add_option("--n", o.n, "number of individuals");
  dem->add_option("--seed", o.seed, "master seed");
  pipeline(dem);
  dem->add_flag("--plot-data", o.plot_data, "also write two-column plot files");
  out(dem);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (const auto& [sub, fn] : commands) {
    if (!sub->parsed()) continue;
    try {
      return fn();
    } catch (const UsageError& e) {
      std::cerr << "cdrmob " << sub->get_name() << ": " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "cdrmob " << sub->get_name() << ": " << e.what() << "\n";
      return kExitData;
    }
  }
  return kExitUsage;
}
