#pragma once

// Daily, weekly and seasonal patterns by cohort, and gender differences.
//
// Each ego first gets one value per axis bin: its mean over the metric windows
// falling in that bin (the 52 or 53 calendar days of a weekday, a single month,
// a single hour of day). Statistics are then taken across egos.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdrmob/core.hpp"
#include "cdrmob/density.hpp"
#include "cdrmob/metrics.hpp"

namespace cdrmob {

enum class Axis { hour, weekday, month };
enum class Statistic { mean, median, normalized_median };

inline std::string_view to_string(Axis a) noexcept {
  switch (a) {
    case Axis::hour: return "hour";
    case Axis::weekday: return "weekday";
    case Axis::month: return "month";
  }
  return "?";
}

inline std::string_view to_string(Statistic s) noexcept {
  switch (s) {
    case Statistic::mean: return "mean";
    case Statistic::median: return "median";
    case Statistic::normalized_median: return "normalized_median";
  }
  return "?";
}

inline std::optional<Statistic> parse_statistic(std::string_view s) noexcept {
  if (s == "mean") return Statistic::mean;
  if (s == "median") return Statistic::median;
  if (s == "normalized_median" || s == "nmedian") return Statistic::normalized_median;
  return std::nullopt;
}

inline std::size_t axis_bins(Axis a) noexcept { return a == Axis::hour ? 24 : a == Axis::weekday ? 7 : 12; }

inline std::string bin_label(Axis a, std::size_t b) {
  if (a == Axis::hour) return fmt::format("{:02}", b);
  if (a == Axis::weekday) return std::string(kWeekdayNames[b]);
  return std::string(kMonthNames[b]);
}

// Metric window granularity each axis is built from.
inline Granularity axis_granularity(Axis a) noexcept {
  return a == Axis::hour ? Granularity::hour_of_day
         : a == Axis::weekday ? Granularity::calendar_day
                              : Granularity::calendar_month;
}

struct EgoCohort {
  std::optional<int> area;
  std::optional<Gender> gender;
  std::optional<AgeGroup> age;
};

struct CohortKey {
  std::optional<int> area;
  std::optional<Gender> gender;
  std::optional<AgeGroup> age;

  bool matches(const EgoCohort& e) const noexcept {
    if (area && e.area != area) return false;
    if (gender && e.gender != gender) return false;
    if (age && e.age != age) return false;
    return true;
  }
  std::string label() const {
    std::string s = area ? area_name(*area) : "all";
    if (gender) s += "_" + std::string(to_string(*gender));
    if (age) s += "_" + std::string(to_string(*age));
    return s;
  }
  bool operator==(const CohortKey&) const = default;
};

class EmptyCohort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-ego, per-bin means: value(e, b) is absent when the ego has no window in b.
class EgoBinValues {
 public:
  EgoBinValues(const WindowSpec& spec, Axis axis, CellMetric metric, std::size_t egos)
      : axis_(axis), metric_(metric), bins_(axis_bins(axis)), egos_(egos), cal_(spec.year),
        sum_(egos * bins_, 0.0), count_(egos * bins_, 0) {
    if (spec.granularity != axis_granularity(axis))
      throw std::invalid_argument("metric rows do not match the " + std::string(to_string(axis)) + " axis");
  }
  EgoBinValues(std::span<const MetricRow> rows, const WindowSpec& spec, Axis axis, CellMetric metric,
               std::size_t egos)
      : EgoBinValues(spec, axis, metric, egos) {
    add(rows);
  }

  // Rows may arrive in any order and in any number of batches.
  void add(std::span<const MetricRow> rows) {
    for (const auto& r : rows) {
      if (r.ego >= egos_) throw std::out_of_range("metric row ego index out of range");
      if (metric_ == CellMetric::rg && !r.has_home) continue;
      std::size_t b = r.window;
      if (axis_ == Axis::weekday) b = static_cast<std::size_t>(cal_.weekday_of_day(static_cast<int>(r.window)));
      if (b >= bins_) throw std::out_of_range("metric row window outside the axis");
      const std::size_t k = r.ego * bins_ + b;
      sum_[k] += metric_ == CellMetric::activity ? r.A : metric_ == CellMetric::mobility ? r.M : r.Rg;
      ++count_[k];
    }
  }

  Axis axis() const noexcept { return axis_; }
  CellMetric metric() const noexcept { return metric_; }
  std::size_t bins() const noexcept { return bins_; }
  std::size_t egos() const noexcept { return egos_; }
  std::optional<double> value(std::size_t ego, std::size_t bin) const {
    const std::size_t k = ego * bins_ + bin;
    if (count_[k] == 0) return std::nullopt;
    return sum_[k] / count_[k];
  }

 private:
  Axis axis_;
  CellMetric metric_;
  std::size_t bins_, egos_;
  YearCalendar cal_;
  std::vector<double> sum_;
  std::vector<std::uint32_t> count_;
};

struct PatternSeries {
  CohortKey key;
  Axis axis = Axis::weekday;
  CellMetric metric = CellMetric::activity;
  Statistic statistic = Statistic::mean;
  std::vector<std::optional<double>> values;
  std::vector<std::size_t> sizes;

  std::optional<std::size_t> argmax() const { return arg(std::greater<>()); }
  std::optional<std::size_t> argmin() const { return arg(std::less<>()); }

 private:
  template <typename Cmp>
  std::optional<std::size_t> arg(Cmp cmp) const {
    std::optional<std::size_t> best;
    for (std::size_t b = 0; b < values.size(); ++b)
      if (values[b] && (!best || cmp(*values[b], *values[*best]))) best = b;
    return best;
  }
};

inline double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

inline PatternSeries pattern(const EgoBinValues& values, std::span<const EgoCohort> cohorts,
                             const CohortKey& key, Statistic stat) {
  if (cohorts.size() != values.egos()) throw std::invalid_argument("cohort table size mismatch");
  PatternSeries s;
  s.key = key;
  s.axis = values.axis();
  s.metric = values.metric();
  s.statistic = stat;
  s.values.assign(values.bins(), std::nullopt);
  s.sizes.assign(values.bins(), 0);
  std::vector<std::size_t> members;
  for (std::size_t e = 0; e < cohorts.size(); ++e)
    if (key.matches(cohorts[e])) members.push_back(e);
  if (members.empty()) throw EmptyCohort("empty cohort: " + key.label());
  std::vector<double> sample;
  for (std::size_t b = 0; b < values.bins(); ++b) {
    sample.clear();
    for (std::size_t e : members)
      if (const auto v = values.value(e, b)) sample.push_back(*v);
    s.sizes[b] = sample.size();
    if (sample.empty()) continue;
    if (stat == Statistic::mean) {
      double sum = 0.0;
      for (double v : sample) sum += v;
      s.values[b] = sum / static_cast<double>(sample.size());
    } else {
      s.values[b] = median_of(sample);
    }
  }
  if (stat == Statistic::normalized_median) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : s.values)
      if (v) {
        sum += *v;
        ++n;
      }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    if (!(mean > 0.0)) throw StatError("normalized median undefined: series mean is zero for " + key.label());
    for (auto& v : s.values)
      if (v) *v /= mean;
  }
  return s;
}

struct PatternSet {
  std::vector<PatternSeries> series;
  std::vector<std::string> notices;  // omitted cohorts
};

inline PatternSet seasonal_by_area(const EgoBinValues& values, std::span<const EgoCohort> cohorts,
                                   Statistic stat) {
  PatternSet out;
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a) {
    try {
      out.series.push_back(pattern(values, cohorts, CohortKey{a, {}, {}}, stat));
    } catch (const EmptyCohort& e) {
      out.notices.emplace_back(e.what());
    } catch (const StatError& e) {
      out.notices.emplace_back(e.what());
    }
  }
  return out;
}

// Series per (area, gender) and per (area, gender, age group). Egos without
// demographics never match a gender stratum.
inline PatternSet gender_age_patterns(const EgoBinValues& values, std::span<const EgoCohort> cohorts,
                                      Statistic stat) {
  PatternSet out;
  const auto add = [&](CohortKey key) {
    try {
      out.series.push_back(pattern(values, cohorts, key, stat));
    } catch (const EmptyCohort& e) {
      out.notices.emplace_back(e.what());
    } catch (const StatError& e) {
      out.notices.emplace_back(e.what());
    }
  };
  for (int a = 0; a < static_cast<int>(kAreaCount); ++a)
    for (Gender g : {Gender::female, Gender::male}) {
      add(CohortKey{a, g, {}});
      for (std::size_t k = 0; k < kAgeGroupCount; ++k) add(CohortKey{a, g, static_cast<AgeGroup>(k)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Gender differences from whole-year values

struct GenderDiff {
  CohortKey key;  // gender unset
  double dA = 0.0, dM = 0.0;
  double se_A = 0.0, se_M = 0.0;  // standard error of each difference
  std::size_t n_female = 0, n_male = 0;
};

struct YearValues {
  double A = 0.0;
  double M = 0.0;
};

inline GenderDiff gender_diff(std::span<const YearValues> values, std::span<const EgoCohort> cohorts,
                              std::optional<int> area, std::optional<AgeGroup> age = std::nullopt) {
  if (values.size() != cohorts.size()) throw std::invalid_argument("cohort table size mismatch");
  struct Moments {
    std::size_t n = 0;
    double sa = 0, saa = 0, sm = 0, smm = 0;
  } f, m;
  for (std::size_t e = 0; e < values.size(); ++e) {
    const auto& c = cohorts[e];
    if (!c.gender || (area && c.area != area) || (age && c.age != age)) continue;
    auto& t = *c.gender == Gender::female ? f : m;
    ++t.n;
    t.sa += values[e].A;
    t.saa += values[e].A * values[e].A;
    t.sm += values[e].M;
    t.smm += values[e].M * values[e].M;
  }
  GenderDiff d;
  d.key = CohortKey{area, {}, age};
  d.n_female = f.n;
  d.n_male = m.n;
  if (f.n == 0 || m.n == 0) throw StatError("gender difference undefined: single-gender cohort " + d.key.label());
  const auto mean = [](double s, std::size_t n) { return s / static_cast<double>(n); };
  // Squared standard error of a cohort mean (sample variance / n).
  const auto se2 = [](double s, double ss, std::size_t n) {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double var = std::max(0.0, (ss - s * s / nn) / (nn - 1.0));
    return var / nn;
  };
  d.dA = mean(f.sa, f.n) - mean(m.sa, m.n);
  d.dM = mean(f.sm, f.n) - mean(m.sm, m.n);
  d.se_A = std::sqrt(se2(f.sa, f.saa, f.n) + se2(m.sa, m.saa, m.n));
  d.se_M = std::sqrt(se2(f.sm, f.smm, f.n) + se2(m.sm, m.smm, m.n));
  return d;
}

inline std::vector<YearValues> year_values(std::span<const MetricRow> whole_year_rows, std::size_t egos) {
  std::vector<YearValues> v(egos);
  for (const auto& r : whole_year_rows) {
    if (r.ego >= egos) throw std::out_of_range("metric row ego index out of range");
    v[r.ego] = {static_cast<double>(r.A), r.M};
  }
  return v;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view kPatternHeader = "metric,statistic,axis,area,gender,age_group,bin,value,n";

inline void append_pattern_rows(std::string& b, const PatternSeries& s) {
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    b += to_string(s.metric);
    b += ',';
    b += to_string(s.statistic);
    b += ',';
    b += to_string(s.axis);
    b += ',';
    if (s.key.area) b += area_name(*s.key.area);
    b += ',';
    if (s.key.gender) b += to_string(*s.key.gender);
    b += ',';
    if (s.key.age) b += to_string(*s.key.age);
    b += ',';
    b += bin_label(s.axis, k);
    b += ',';
    if (s.values[k]) append_double(b, *s.values[k]);
    b += ',';
    b += std::to_string(s.sizes[k]);
    b += '\n';
  }
}

inline nlohmann::ordered_json to_json(const PatternSeries& s) {
  nlohmann::ordered_json j;
  j["metric"] = to_string(s.metric);
  j["statistic"] = to_string(s.statistic);
  j["axis"] = to_string(s.axis);
  j["cohort"] = s.key.label();
  auto& bins = j["bins"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    nlohmann::ordered_json b;
    b["bin"] = bin_label(s.axis, k);
    if (s.values[k]) b["value"] = *s.values[k];
    else b["value"] = nullptr;
    b["n"] = s.sizes[k];
    bins.push_back(std::move(b));
  }
  return j;
}

inline nlohmann::ordered_json to_json(const GenderDiff& d) {
  nlohmann::ordered_json j;
  j["cohort"] = d.key.label();
  j["dA"] = d.dA;
  j["dM"] = d.dM;
  j["se_A"] = d.se_A;
  j["se_M"] = d.se_M;
  j["n_female"] = d.n_female;
  j["n_male"] = d.n_male;
  return j;
}

inline std::string series_file_stem(const PatternSeries& s) {
  return fmt::format("{}_{}_{}_{}", to_string(s.metric), to_string(s.axis), to_string(s.statistic), s.key.label());
}

// Two-column (bin index, value) file per series; absent bins are skipped.
inline void write_plot_data(const std::filesystem::path& dir, std::span<const PatternSeries> series) {
  std::filesystem::create_directories(dir);
  for (const auto& s : series) {
    CsvWriter w((dir / (series_file_stem(s) + ".dat")).string());
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (!s.values[k]) continue;
      auto& b = w.buffer();
      b += std::to_string(k);
      b += ' ';
      append_double(b, *s.values[k]);
      b += '\n';
    }
    w.close();
  }
}

}  // namespace cdrmob
