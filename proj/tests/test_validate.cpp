#include <gtest/gtest.h>

#include "cdrmob/validate.hpp"

using namespace cdrmob;

namespace {

struct Run {
  Corpus corpus;
  ReportResult result;
};

Run run_small(bool filter = true) {
  GenConfig cfg;
  cfg.n_individuals = 1000;
  cfg.n_cells = 1000;
  cfg.seed = 7;
  Run r{generate(cfg), {}};
  PipelineConfig p;
  p.filter.enabled = filter;
  r.result = run_report(r.corpus.to_store(), r.corpus.towers, &r.corpus.demographics, p);
  return r;
}

void expect_pass(const Scorecard& s, std::string_view name) {
  const Check* c = s.find(name);
  ASSERT_NE(c, nullptr) << name;
  ASSERT_TRUE(c->pass.has_value()) << name;
  EXPECT_TRUE(*c->pass) << name << ": " << c->detail;
}

}  // namespace

TEST(Validate, SmallDefaultCorpusRecoversPlantedStructure) {
  const auto r = run_small();
  const auto card = validate_corpus(r.result, r.corpus.truth);
  for (auto name : {"home_accuracy", "inactivity_window", "filter_precision", "filter_recall"}) expect_pass(card, name);
  EXPECT_EQ(r.result.removed, r.corpus.truth.spam_ids);
  const auto j = to_json(card);
  EXPECT_EQ(j["all_pass"], card.all_pass());
  EXPECT_EQ(j["checks"].size(), card.checks.size());
}

TEST(Validate, DisabledFilterFailsRecall) {
  const auto r = run_small(false);
  const auto card = validate_corpus(r.result, r.corpus.truth);
  const Check* recall = card.find("filter_recall");
  ASSERT_NE(recall, nullptr);
  EXPECT_EQ(recall->pass, false);
  EXPECT_EQ(recall->value, 0.0);
  EXPECT_FALSE(card.all_pass());
}

TEST(Validate, MismatchedTruthIsDataError) {
  const auto r = run_small();
  GenConfig other;
  other.n_individuals = 50;
  other.n_cells = 50;
  other.seed = 8;
  auto truth = generate(other).truth;
  for (auto& e : truth.egos) e.id = "x" + e.id;
  EXPECT_THROW(validate_corpus(r.result, truth), DataError);
}
