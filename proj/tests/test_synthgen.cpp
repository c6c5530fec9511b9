#include <gtest/gtest.h>

#include <set>

#include "cdrmob/home.hpp"
#include "cdrmob/synthgen.hpp"
#include "support.hpp"

using namespace cdrmob;
using testing_support::read_file;
using testing_support::TempDir;

namespace {

GenConfig small(std::size_t n, std::uint64_t seed = 3) {
  GenConfig c;
  c.n_individuals = n;
  c.n_cells = std::min<std::size_t>(n, 2000);
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Synthgen, SameSeedGivesIdenticalFiles) {
  TempDir dir;
  const auto cfg = small(150);
  const auto a = write_corpus(generate(cfg, 1), dir / "a");
  const auto b = write_corpus(generate(cfg, 4), dir / "b");
  for (auto member : {&CorpusFiles::cdr, &CorpusFiles::towers, &CorpusFiles::demographics, &CorpusFiles::truth,
                      &CorpusFiles::config})
    EXPECT_EQ(read_file((a.*member).string()), read_file((b.*member).string())) << (a.*member);
  auto other = cfg;
  other.seed = 4;
  const auto c = write_corpus(generate(other), dir / "c");
  EXPECT_NE(read_file(a.cdr.string()), read_file(c.cdr.string()));
}

TEST(Synthgen, SingleHomeboundPersonHasExactHome) {
  auto cfg = small(1);
  cfg.spam_fraction = 0.0;
  cfg.p_home_night = 1.0;
  cfg.p_away = 0.0;
  const auto corpus = generate(cfg);
  ASSERT_EQ(corpus.truth.egos.size(), 1u);
  const auto& truth = corpus.truth.egos[0];
  ASSERT_FALSE(corpus.events.empty());
  for (const auto& e : corpus.events) {
    if (corpus.ids.name(e.ego) != truth.id) continue;
    EXPECT_EQ(corpus.towers->position(e.tower), truth.home);
  }
  auto r = ingest(corpus.to_store(), corpus.towers, {}, 1);
  ASSERT_EQ(r.timelines.size(), 1u);
  const InactiveWindow night{60, 420};
  const auto home = compute_home(r.timelines.events(0), night);
  ASSERT_TRUE(home);
  EXPECT_NEAR(home->position.lat, truth.home.lat, 1e-12);
  EXPECT_NEAR(home->position.lon, truth.home.lon, 1e-12);
}

TEST(Synthgen, SpamIsOneWayAndEveryoneElseReciprocates) {
  const auto cfg = small(400, 9);
  const auto corpus = generate(cfg);
  const std::set<std::string> spam(corpus.truth.spam_ids.begin(), corpus.truth.spam_ids.end());
  EXPECT_EQ(spam.size(), static_cast<std::size_t>(std::llround(cfg.spam_fraction * 400 / (1 - cfg.spam_fraction))));
  std::set<std::pair<std::uint32_t, std::uint32_t>> out, in;
  for (const auto& e : corpus.events) {
    const bool ego_spam = spam.count(corpus.ids.name(e.ego)) > 0;
    const bool peer_spam = spam.count(corpus.ids.name(e.peer)) > 0;
    if (ego_spam) {
      EXPECT_EQ(e.direction, Direction::outgoing);
    }
    if (peer_spam) {
      EXPECT_EQ(e.direction, Direction::incoming);
    }
    (e.direction == Direction::outgoing ? out : in).insert({e.ego, e.peer});
  }
  std::set<std::uint32_t> reciprocating;
  for (const auto& p : out)
    if (in.count(p)) reciprocating.insert(p.first);
  for (const auto& t : corpus.truth.egos) EXPECT_TRUE(reciprocating.count(*corpus.ids.find(t.id))) << t.id;

  auto r = ingest(corpus.to_store(), corpus.towers, {}, 1);
  EXPECT_EQ(r.removed_unilateral, corpus.truth.spam_ids);
}

TEST(Synthgen, DailyRhythmPeaksNearPlantedTimes) {
  const auto cfg = small(600, 5);
  const auto corpus = generate(cfg);
  auto r = ingest(corpus.to_store(), corpus.towers, {}, 1);
  const auto profile = daily_profile(r.timelines, ProfileMetric::activity, 30, cfg.year);
  const auto fit = fit_bimodal(profile);
  EXPECT_NEAR(fit.day.mu, cfg.mu_day, 0.3);
  EXPECT_NEAR(fit.evening.mu, cfg.mu_eve, 0.3);
  const auto hourly = daily_profile(r.timelines, ProfileMetric::activity, 60, cfg.year);
  EXPECT_EQ(find_inactive_window(hourly).label(), "01:00-07:00");
}

TEST(Synthgen, TruthAndConfigRoundTrip) {
  TempDir dir;
  auto cfg = small(50);
  cfg.flip_rank = 7;
  const auto corpus = generate(cfg);
  const auto files = write_corpus(corpus, dir.path());
  const auto truth = load_ground_truth(files.truth.string());
  ASSERT_EQ(truth.egos.size(), corpus.truth.egos.size());
  for (std::size_t k = 0; k < truth.egos.size(); ++k) {
    EXPECT_EQ(truth.egos[k].id, corpus.truth.egos[k].id);
    EXPECT_EQ(truth.egos[k].home, corpus.truth.egos[k].home);
    EXPECT_EQ(truth.egos[k].area, corpus.truth.egos[k].area);
    EXPECT_EQ(truth.egos[k].gender, corpus.truth.egos[k].gender);
  }
  EXPECT_EQ(truth.spam_ids, corpus.truth.spam_ids);
  EXPECT_EQ(nlohmann::json(load_gen_config(files.config.string())).dump(), nlohmann::json(cfg).dump());
  EXPECT_EQ(truth.egos.size(), 50u);
  EXPECT_NE(corpus.truth.find(truth.egos[3].id), nullptr);
  EXPECT_EQ(corpus.truth.find("nobody"), nullptr);
}

TEST(Synthgen, PartialConfigUsesDefaults) {
  TempDir dir;
  testing_support::write_file(dir / "c.json", R"({"n_individuals": 12, "seed": 99})");
  const auto cfg = load_gen_config(dir / "c.json");
  EXPECT_EQ(cfg.n_individuals, 12u);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.n_cells, GenConfig{}.n_cells);
  testing_support::write_file(dir / "bad.json", R"({"n_individuals": "many"})");
  EXPECT_THROW(load_gen_config(dir / "bad.json"), DataError);
}

TEST(Synthgen, RejectsInvalidConfigs) {
  const auto with = [](auto edit) {
    GenConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(with([](GenConfig& c) { c.n_individuals = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(with([](GenConfig& c) { c.p_away = 1.5; }).validate(), std::invalid_argument);
  EXPECT_THROW(with([](GenConfig& c) { c.zipf_s = -1; }).validate(), std::invalid_argument);
  EXPECT_THROW(with([](GenConfig& c) { c.n_cells = 100000000; }).validate(), std::invalid_argument);
  EXPECT_THROW(with([](GenConfig& c) { c.tower_step = 0.03; }).validate(), std::invalid_argument);
  EXPECT_THROW(with([](GenConfig& c) { c.sigma_day = 0; }).validate(), std::invalid_argument);
  EXPECT_NO_THROW(GenConfig{}.validate());
}

TEST(Synthgen, PlantedZipfGridCountsEveryHome) {
  const auto g = planted_zipf_grid(500, 1.0, 100000, 2);
  EXPECT_EQ(g.total, 100000u);
  std::uint64_t sum = 0;
  for (const auto& [c, n] : g.counts) sum += n;
  EXPECT_EQ(sum, 100000u);
  EXPECT_LE(g.counts.size(), 500u);
  EXPECT_THROW(planted_zipf_grid(0, 1.0, 10, 1), std::invalid_argument);
}
