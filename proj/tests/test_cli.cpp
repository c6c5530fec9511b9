#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using testing_support::read_file;
using testing_support::run;
using testing_support::RunResult;
using testing_support::TempDir;

namespace {

// Every file under `dir` except the run manifest, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const auto r = run(CDRMOB_CLI, {"generate", "--n", "1000", "--seed", "7", "--out", corpus()});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string corpus() { return *dir_ / "corpus"; }
  static std::string cdr() { return corpus() + "/cdr.csv"; }
  static std::string towers() { return corpus() + "/towers.csv"; }
  static std::string demo() { return corpus() + "/demographics.csv"; }
  static std::string scratch(const std::string& name) { return *dir_ / name; }

  static RunResult cli(std::vector<std::string> args) { return run(CDRMOB_CLI, args); }

  static inline TempDir* dir_ = nullptr;
};

}  // namespace

TEST_F(Cli, GenerateWritesCorpusAndManifest) {
  for (const char* f : {"cdr.csv", "towers.csv", "demographics.csv", "truth.json", "config.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(fs::path(corpus()) / f)) << f;
  const auto cdr_text = read_file(cdr());
  EXPECT_EQ(cdr_text.substr(0, cdr_text.find('\n')), "ego_id,peer_id,timestamp,tower_id,kind,direction");
  const auto manifest = nlohmann::json::parse(read_file(corpus() + "/manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "generate");
}

TEST_F(Cli, ReportFindsPlantedNightWindow) {
  const auto out = scratch("report1");
  const auto r = cli({"report", "--cdr", cdr(), "--towers", towers(), "--demographics", demo(), "--out", out});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto summary = nlohmann::json::parse(read_file(out + "/summary.json"));
  EXPECT_EQ(summary["inactivity_window"], "01:00-07:00");
  EXPECT_GT(summary["individuals_analysed"].get<int>(), 900);
  for (const char* f : {"homes.csv", "metrics_year.csv", "grid.csv", "areas.csv", "patterns.csv", "gender_diff.csv",
                        "fit.json", "density.json", "removed_ids.txt"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
}

TEST_F(Cli, ReportIsDeterministicAcrossThreadCounts) {
  const auto a = scratch("det1"), b = scratch("det4");
  ASSERT_EQ(cli({"report", "--cdr", cdr(), "--towers", towers(), "--threads", "1", "--plot-data", "--out", a}).status, 0);
  ASSERT_EQ(cli({"report", "--cdr", cdr(), "--towers", towers(), "--threads", "4", "--plot-data", "--out", b}).status, 0);
  const auto ta = tree(a), tb = tree(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, text] : ta) {
    ASSERT_TRUE(tb.count(name)) << name;
    EXPECT_TRUE(text == tb.at(name)) << name;
  }
}

TEST_F(Cli, StagesComposeToTheReport) {
  const auto rep = scratch("compose_report"), ing = scratch("compose_ingest"), hom = scratch("compose_homes"),
             met = scratch("compose_metrics"), den = scratch("compose_density"), pat = scratch("compose_patterns");
  ASSERT_EQ(cli({"report", "--cdr", cdr(), "--towers", towers(), "--demographics", demo(), "--out", rep}).status, 0);
  ASSERT_EQ(cli({"ingest", "--cdr", cdr(), "--towers", towers(), "--spool-parts", "3", "--out", ing}).status, 0);
  const auto spool = ing + "/spool";
  auto r = cli({"homes", "--spool", spool, "--out", hom});
  ASSERT_EQ(r.status, 0) << r.err;
  r = cli({"metrics", "--spool", spool, "--homes", hom + "/homes.csv", "--out", met});
  ASSERT_EQ(r.status, 0) << r.err;
  r = cli({"density", "--homes", hom + "/homes.csv", "--metrics-year", met + "/metrics_year.csv", "--out", den});
  ASSERT_EQ(r.status, 0) << r.err;
  r = cli({"patterns", "--homes", hom + "/homes.csv", "--metrics-year", met + "/metrics_year.csv", "--metrics-month",
           met + "/metrics_month.csv", "--metrics-day", met + "/metrics_day.csv", "--metrics-hour",
           met + "/metrics_hour.csv", "--demographics", demo(), "--out", pat});
  ASSERT_EQ(r.status, 0) << r.err;

  EXPECT_EQ(read_file(ing + "/removed_ids.txt"), read_file(rep + "/removed_ids.txt"));
  EXPECT_EQ(read_file(hom + "/homes.csv"), read_file(rep + "/homes.csv"));
  EXPECT_EQ(read_file(hom + "/fit.json"), read_file(rep + "/fit.json"));
  for (const char* f : {"metrics_year.csv", "metrics_month.csv", "metrics_hour.csv"})
    EXPECT_EQ(read_file(met + "/" + f), read_file(rep + "/" + f)) << f;
  EXPECT_EQ(read_file(den + "/grid.csv"), read_file(rep + "/grid.csv"));
  EXPECT_EQ(read_file(den + "/rank_size.csv"), read_file(rep + "/rank_size.csv"));
  EXPECT_EQ(read_file(pat + "/patterns.csv"), read_file(rep + "/patterns.csv"));
  EXPECT_EQ(read_file(pat + "/gender_diff.csv"), read_file(rep + "/gender_diff.csv"));
}

TEST_F(Cli, EmptyCorpusIsDataErrorWithoutOutput) {
  const auto empty = scratch("empty.csv");
  testing_support::write_file(empty, "ego_id,peer_id,timestamp,tower_id,kind,direction\n");
  const auto out = scratch("empty_out");
  const auto r = cli({"metrics", "--cdr", empty, "--towers", towers(), "--out", out});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("no surviving individuals"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, MissingInputIsDataError) {
  const auto r = cli({"report", "--cdr", scratch("nope.csv"), "--towers", towers(), "--out", scratch("nope_out")});
  EXPECT_EQ(r.status, 2);
  EXPECT_FALSE(fs::exists(scratch("nope_out")));
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli({"report", "--cdr", cdr(), "--towers", towers()}).status, 1);  // no --out
  EXPECT_EQ(cli({"report", "--bogus", "--out", scratch("u")}).status, 1);
  EXPECT_EQ(cli({}).status, 1);
  EXPECT_EQ(cli({"metrics", "--cdr", cdr(), "--towers", towers(), "--window", "week", "--out", scratch("u2")}).status, 1);
  EXPECT_EQ(cli({"report", "--cdr", cdr(), "--towers", towers(), "--filter-rule", "sometimes", "--out", scratch("u3")}).status,
            1);
  EXPECT_EQ(cli({"--help"}).status, 0);
}

TEST_F(Cli, ValidateFailsWithoutFilter) {
  const auto out = scratch("val_nofilter");
  const auto r = cli({"validate", "--cdr", cdr(), "--towers", towers(), "--truth", corpus() + "/truth.json",
                      "--no-filter", "--out", out});
  EXPECT_EQ(r.status, 3) << r.err;
  EXPECT_NE(r.out.find("FAIL  filter_recall"), std::string::npos) << r.out;
  const auto card = nlohmann::json::parse(read_file(out + "/scorecard.json"));
  EXPECT_FALSE(card["all_pass"].get<bool>());
}

TEST_F(Cli, ValidateScoresTheFilteredRun) {
  const auto out = scratch("val");
  const auto r = cli({"validate", "--cdr", cdr(), "--towers", towers(), "--truth", corpus() + "/truth.json", "--out", out});
  EXPECT_TRUE(r.status == 0 || r.status == 3) << r.err;
  for (const char* name : {"home_accuracy", "inactivity_window", "filter_precision", "filter_recall"})
    EXPECT_NE(r.out.find("PASS  " + std::string(name)), std::string::npos) << name << "\n" << r.out;
}
