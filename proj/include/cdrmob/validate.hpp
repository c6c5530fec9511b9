#pragma once

// Scores a report run against the ground truth of the corpus it was run on.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdrmob/pipeline.hpp"
#include "cdrmob/synthgen.hpp"

namespace cdrmob {

struct ValidationTolerances {
  double home_accuracy = 0.99;      // share of homes within one grid cell
  double mu_minutes = 10.0;
  double sigma_hours = 0.3;
  double null_rho = 0.05;           // |rho| bound when a coupling is switched off
  double sign_change_factor = 2.0;  // detected flip rank within this factor
  double dip_ratio = 0.9;           // August / mean(July, September) below this is a dip
  double null_se = 3.0;             // symmetric gender plant: |diff| below this many SEs
  std::size_t min_area_individuals = 50;
};

struct Check {
  std::string name;
  std::optional<double> value;
  std::string expected;
  std::optional<bool> pass;  // unset: reported only
  std::string detail;
};

struct Scorecard {
  std::vector<Check> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass.value_or(true); });
  }
  const Check* find(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline nlohmann::ordered_json to_json(const Scorecard& s) {
  nlohmann::ordered_json j;
  j["all_pass"] = s.all_pass();
  auto& arr = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : s.checks) {
    nlohmann::ordered_json r;
    r["name"] = c.name;
    if (c.value) r["value"] = *c.value;
    else r["value"] = nullptr;
    r["expected"] = c.expected;
    if (c.pass) r["status"] = *c.pass ? "pass" : "fail";
    else r["status"] = "info";
    if (!c.detail.empty()) r["detail"] = c.detail;
    arr.push_back(std::move(r));
  }
  return j;
}

namespace detail {

inline int sign_of(double x) { return (x > 0) - (x < 0); }

inline double planted_august_ratio(const std::array<double, 12>& m) { return m[7] / (0.5 * (m[6] + m[8])); }

}  // namespace detail

inline Scorecard validate_corpus(const ReportResult& r, const GroundTruth& truth,
                                 const ValidationTolerances& tol = {}) {
  const GenConfig& cfg = truth.config;
  const auto& tl = r.population.timelines;
  Scorecard card;
  const auto add = [&](std::string name, std::optional<double> v, std::string expected, std::optional<bool> pass,
                       std::string detail = {}) {
    card.checks.push_back(Check{std::move(name), v, std::move(expected), pass, std::move(detail)});
  };

  // Every analysed individual must be known to the truth file.
  std::size_t known = 0;
  for (std::size_t k = 0; k < tl.size(); ++k) {
    const auto id = tl.ego_id(k);
    if (truth.find(id)) ++known;
    else if (!std::binary_search(truth.spam_ids.begin(), truth.spam_ids.end(), id))
      throw DataError("corpus does not match truth: unknown individual " + std::string(id));
  }
  if (truth.egos.empty() || 2 * known < truth.egos.size())
    throw DataError("corpus does not match truth: most planted individuals are missing");

  // Scored over detected homes; individuals too quiet at night to get one
  // are reported as coverage.
  {
    std::size_t ok = 0;
    for (std::size_t k = 0; k < tl.size(); ++k)
      if (const TrueEgo* t = truth.find(tl.ego_id(k))) {
        const auto a = cell_of(r.population.homes[k].position, truth.grid);
        if (std::abs(a.i - t->cell.i) <= 1 && std::abs(a.j - t->cell.j) <= 1) ++ok;
      }
    const double acc = known ? static_cast<double>(ok) / static_cast<double>(known) : 0.0;
    add("home_accuracy", acc, fmt::format(">= {}", tol.home_accuracy), acc >= tol.home_accuracy,
        fmt::format("{} of {} detected homes within one cell of the planted home", ok, known));
    add("home_coverage", static_cast<double>(known) / static_cast<double>(truth.egos.size()), "", std::nullopt,
        fmt::format("{} of {} planted individuals have a detected home", known, truth.egos.size()));
  }

  {
    const InactiveWindow planted{static_cast<int>(std::lround(cfg.night_start * 60)),
                                 static_cast<int>(std::lround(cfg.night_end * 60))};
    std::optional<bool> pass;
    if (r.home.window_detected) pass = r.home.window.start_minute == planted.start_minute &&
                                       r.home.window.end_minute == planted.end_minute;
    add("inactivity_window", std::nullopt, planted.label(), pass,
        r.home.window.label() + (r.home.window_detected ? "" : " (given on the command line)"));
  }

  if (r.home.fit_activity) {
    const auto& f = *r.home.fit_activity;
    const auto mu = [&](const char* name, double got, double want) {
      const double d = std::abs(got - want) * 60.0;
      add(name, got, fmt::format("{} +- {} min", want, tol.mu_minutes), d <= tol.mu_minutes);
    };
    const auto sigma = [&](const char* name, double got, double want) {
      add(name, got, fmt::format("{} +- {} h", want, tol.sigma_hours), std::abs(got - want) <= tol.sigma_hours);
    };
    mu("fit_mu_day", f.day.mu, cfg.mu_day);
    sigma("fit_sigma_day", f.day.sigma, cfg.sigma_day);
    mu("fit_mu_eve", f.evening.mu, cfg.mu_eve);
    sigma("fit_sigma_eve", f.evening.sigma, cfg.sigma_eve);
  } else {
    add("fit_activity", std::nullopt, "bimodal fit", false, r.home.fit_activity_error);
  }

  {
    std::vector<std::string> removed(r.removed);
    std::sort(removed.begin(), removed.end());
    std::vector<std::string> hit;
    std::set_intersection(removed.begin(), removed.end(), truth.spam_ids.begin(), truth.spam_ids.end(),
                          std::back_inserter(hit));
    const double precision = removed.empty() ? 1.0 : static_cast<double>(hit.size()) / removed.size();
    const double recall = truth.spam_ids.empty() ? 1.0 : static_cast<double>(hit.size()) / truth.spam_ids.size();
    add("filter_precision", precision, "1", precision == 1.0,
        fmt::format("{} removed, {} of them planted", removed.size(), hit.size()));
    add("filter_recall", recall, "1", recall == 1.0,
        fmt::format("{} of {} planted one-way ids removed", hit.size(), truth.spam_ids.size()));
  }

  const auto& rho = r.density.rho;
  if (cfg.flip_rank == 0) {
    if (cfg.beta == 0) {
      add("rho_density_activity", rho[0], fmt::format("|rho| < {}", tol.null_rho),
          rho[0] && std::abs(*rho[0]) < tol.null_rho);
    } else {
      add("rho_density_activity", rho[0], cfg.beta > 0 ? "> 0" : "< 0",
          rho[0] && detail::sign_of(*rho[0]) == detail::sign_of(cfg.beta));
    }
  } else {
    std::optional<double> at;
    for (const auto& [m, bands] : r.density.bands)
      if (m == CellMetric::activity) at = sign_change_rank(bands);
    const double want = static_cast<double>(cfg.flip_rank);
    add("activity_sign_change_rank", at, fmt::format("{} within a factor {}", want, tol.sign_change_factor),
        at && *at <= want * tol.sign_change_factor && *at >= want / tol.sign_change_factor);
  }
  if (cfg.gamma == 0) {
    add("rho_density_mobility", rho[1], fmt::format("|rho| < {}", tol.null_rho),
        rho[1] && std::abs(*rho[1]) < tol.null_rho);
  } else {
    add("rho_density_mobility", rho[1], cfg.gamma > 0 ? "< 0" : "> 0",
        rho[1] && detail::sign_of(*rho[1]) == -detail::sign_of(cfg.gamma));
  }

  {
    std::optional<double> exponent;
    if (r.density.rank_size.fit) exponent = r.density.rank_size.fit->exponent;
    add("rank_size_exponent", exponent, fmt::format("planted settlement exponent {}", cfg.zipf_s), std::nullopt,
        "homes per cell follow the planted law only when cells hold many homes");
  }

  const auto area_size = [&](int a) {
    for (const auto& s : r.density.area_table)
      if (s.area == a) return static_cast<std::size_t>(s.egos);
    return std::size_t{0};
  };
  const auto planted_max = static_cast<std::size_t>(std::max_element(cfg.weekday.begin(), cfg.weekday.end()) - cfg.weekday.begin());
  const auto planted_min = static_cast<std::size_t>(std::min_element(cfg.weekday.begin(), cfg.weekday.end()) - cfg.weekday.begin());
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a) {
    const auto name = area_name(a);
    if (area_size(a) < tol.min_area_individuals) {
      add(name + "_patterns", std::nullopt, "", std::nullopt,
          fmt::format("{} individuals, too few to score", area_size(a)));
      continue;
    }
    const CohortKey key{a, {}, {}};
    if (const auto* w = r.patterns.find(CellMetric::activity, Axis::weekday, Statistic::normalized_median, key)) {
      const auto hi = w->argmax(), lo = w->argmin();
      add(name + "_weekly_max", std::nullopt, bin_label(Axis::weekday, planted_max), hi && *hi == planted_max,
          hi ? bin_label(Axis::weekday, *hi) : "none");
      add(name + "_weekly_min", std::nullopt, bin_label(Axis::weekday, planted_min), lo && *lo == planted_min,
          lo ? bin_label(Axis::weekday, *lo) : "none");
    }
    if (const auto* m = r.patterns.find(CellMetric::activity, Axis::month, Statistic::normalized_median, key)) {
      const bool planted = detail::planted_august_ratio(cfg.month_activity[static_cast<std::size_t>(a)]) < tol.dip_ratio;
      std::optional<double> ratio;
      if (m->values[6] && m->values[7] && m->values[8]) ratio = *m->values[7] / (0.5 * (*m->values[6] + *m->values[8]));
      add(name + "_august_dip", ratio, planted ? fmt::format("< {}", tol.dip_ratio) : fmt::format(">= {}", tol.dip_ratio),
          ratio && (*ratio < tol.dip_ratio) == planted);
    }
  }

  // Gender differences per area.
  std::vector<std::pair<int, double>> ordered;  // (area, dA) where the plant is nonzero
  for (const auto& d : r.patterns.diffs) {
    if (d.key.age || !d.key.area) continue;
    const int a = *d.key.area;
    if (area_size(a) < tol.min_area_individuals) continue;
    const double excess = cfg.female_activity_excess[static_cast<std::size_t>(a)];
    const auto name = area_name(a);
    if (excess == 0) {
      add(name + "_gender_dA", d.dA, fmt::format("|dA| < {} SE", tol.null_se), std::abs(d.dA) < tol.null_se * d.se_A,
          fmt::format("se {}", d.se_A));
    } else {
      add(name + "_gender_dA", d.dA, excess > 0 ? "> 0" : "< 0", detail::sign_of(d.dA) == detail::sign_of(excess),
          fmt::format("se {}", d.se_A));
      ordered.emplace_back(a, d.dA);
    }
    if (cfg.female_mobility == 1.0)
      add(name + "_gender_dM", d.dM, fmt::format("|dM| < {} SE", tol.null_se), std::abs(d.dM) < tol.null_se * d.se_M,
          fmt::format("se {}", d.se_M));
  }
  if (ordered.size() >= 2) {
    bool planted_desc = true, seen_desc = true;
    for (std::size_t k = 1; k < ordered.size(); ++k) {
      const auto pa = cfg.female_activity_excess[static_cast<std::size_t>(ordered[k - 1].first)];
      const auto pb = cfg.female_activity_excess[static_cast<std::size_t>(ordered[k].first)];
      planted_desc = planted_desc && pa > pb;
      seen_desc = seen_desc && ordered[k - 1].second > ordered[k].second;
    }
    if (planted_desc) add("gender_dA_ordering", std::nullopt, "strictly decreasing from Area1", seen_desc);
  }
  return card;
}

}  // namespace cdrmob
