#pragma once

// Per-individual communication activity A, mobility M (root-mean-square
// displacement between consecutive events) and radius of gyration Rg around
// the home location, over arbitrary time windows.
//
//   A  = number of events in the window
//   M  = sqrt( (1/A) * sum of squared consecutive displacements )
//   Rg = sqrt( (1/A) * sum of squared distances from home )
//
// M keeps the 1/A normalisation even though only A-1 displacements exist, so
// two events d km apart give M = d / sqrt(2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrmob/civil_time.hpp"
#include "cdrmob/geo.hpp"
#include "cdrmob/ingest.hpp"
#include "cdrmob/parallel.hpp"

namespace cdrmob {

struct TimeRange {
  std::int64_t start = 0;  // inclusive
  std::int64_t end = 0;    // exclusive
  bool contains(std::int64_t ts) const noexcept { return ts >= start && ts < end; }
};

enum class MobilityNormalization {
  by_activity,  // 1/A as printed in the metric definition (default)
  by_pairs,     // 1/(number of displacement pairs); non-default variant
};

namespace detail {

inline std::span<const TimelineEvent> slice(std::span<const TimelineEvent> tl, TimeRange w) {
  auto lo = std::lower_bound(tl.begin(), tl.end(), w.start,
                             [](const TimelineEvent& e, std::int64_t t) { return e.timestamp < t; });
  auto hi = std::lower_bound(lo, tl.end(), w.end,
                             [](const TimelineEvent& e, std::int64_t t) { return e.timestamp < t; });
  return {lo, hi};
}

inline double square(double x) noexcept { return x * x; }

}  // namespace detail

// Timeline must be time-ordered.
inline std::uint64_t activity(std::span<const TimelineEvent> timeline, TimeRange window) {
  return detail::slice(timeline, window).size();
}

inline double mobility(std::span<const TimelineEvent> timeline, TimeRange window,
                       MobilityNormalization norm = MobilityNormalization::by_activity) {
  const auto in = detail::slice(timeline, window);
  if (in.size() <= 1) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < in.size(); ++k)
    sum += detail::square(haversine_km(in[k].position, in[k + 1].position));
  const double denom = norm == MobilityNormalization::by_activity
                           ? static_cast<double>(in.size())
                           : static_cast<double>(in.size() - 1);
  return std::sqrt(sum / denom);
}

inline double radius_of_gyration(std::span<const TimelineEvent> timeline,
                                 std::optional<LatLon> home, TimeRange window) {
  if (!home) throw std::invalid_argument("radius of gyration needs a home location");
  const auto in = detail::slice(timeline, window);
  if (in.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : in) sum += detail::square(haversine_km(e.position, *home));
  return std::sqrt(sum / static_cast<double>(in.size()));
}

// ---------------------------------------------------------------------------
// Window specs

enum class Granularity { hour_of_day, calendar_day, day_of_week, calendar_month, whole_year, range };

struct WindowSpec {
  Granularity granularity = Granularity::whole_year;
  int year = 2008;
  TimeRange range{};  // used by Granularity::range only

  std::size_t window_count() const {
    switch (granularity) {
      case Granularity::hour_of_day: return 24;
      case Granularity::calendar_day: return static_cast<std::size_t>(days_in_year(year));
      case Granularity::day_of_week: return 7;
      case Granularity::calendar_month: return 12;
      case Granularity::whole_year:
      case Granularity::range: return 1;
    }
    return 1;
  }

  std::string label(std::size_t w) const {
    char buf[32];
    switch (granularity) {
      case Granularity::hour_of_day:
        std::snprintf(buf, sizeof buf, "h%02zu", w);
        return buf;
      case Granularity::calendar_day: return YearCalendar(year).day_label(static_cast<int>(w));
      case Granularity::day_of_week: return std::string(kWeekdayNames[w]);
      case Granularity::calendar_month:
        std::snprintf(buf, sizeof buf, "%04d-%02zu", year, w + 1);
        return buf;
      case Granularity::whole_year: return std::to_string(year);
      case Granularity::range: return "range";
    }
    return {};
  }

  void validate() const {
    if (granularity == Granularity::range) {
      const YearCalendar cal(year);
      if (range.end <= range.start) throw std::invalid_argument("empty metric window");
      if (range.start < cal.start() || range.end > cal.end())
        throw std::invalid_argument("metric window outside the analysis year");
    }
  }
};

inline std::string_view granularity_name(Granularity g) noexcept {
  switch (g) {
    case Granularity::hour_of_day: return "hour";
    case Granularity::calendar_day: return "day";
    case Granularity::day_of_week: return "dow";
    case Granularity::calendar_month: return "month";
    case Granularity::whole_year: return "year";
    case Granularity::range: return "range";
  }
  return "?";
}

inline std::optional<Granularity> parse_granularity(std::string_view s) noexcept {
  if (s == "hour") return Granularity::hour_of_day;
  if (s == "day") return Granularity::calendar_day;
  if (s == "dow") return Granularity::day_of_week;
  if (s == "month") return Granularity::calendar_month;
  if (s == "year") return Granularity::whole_year;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Batch computation

struct WindowAccum {
  std::uint32_t events = 0;
  std::uint32_t pairs = 0;
  double displacement_sq = 0.0;
  double home_sq = 0.0;
};

struct MetricRow {
  std::uint32_t ego = 0;     // timeline index
  std::uint32_t window = 0;  // window index within its WindowSpec
  std::uint32_t A = 0;
  double M = 0.0;
  double Rg = 0.0;
  std::uint32_t pairs = 0;
  bool has_home = true;  // false: Rg undefined, row flagged
  bool operator==(const MetricRow&) const = default;
};

namespace detail {

// Per-event window index and "interval" id; displacements only count between
// consecutive events sharing an interval.
struct WindowMapper {
  const WindowSpec& spec;
  YearCalendar cal;

  explicit WindowMapper(const WindowSpec& s) : spec(s), cal(s.year) {}

  // Returns false when the event lies outside every window.
  bool map(std::int64_t ts, std::uint32_t& window, std::int64_t& interval) const {
    if (spec.granularity == Granularity::range) {
      if (!spec.range.contains(ts)) return false;
      window = 0;
      interval = 0;
      return true;
    }
    if (!cal.contains(ts)) return false;
    const int day = cal.day_index(ts);
    switch (spec.granularity) {
      case Granularity::hour_of_day:
        window = static_cast<std::uint32_t>(second_of_day(ts) / 3600);
        interval = day;
        break;
      case Granularity::calendar_day:
        window = static_cast<std::uint32_t>(day);
        interval = day;
        break;
      case Granularity::day_of_week:
        window = static_cast<std::uint32_t>(cal.weekday_of_day(day));
        interval = day;
        break;
      case Granularity::calendar_month:
        window = static_cast<std::uint32_t>(cal.month_of_day(day));
        interval = window;
        break;
      default:
        window = 0;
        interval = 0;
    }
    return true;
  }
};

}  // namespace detail

// Fills acc (size spec.window_count()) for one timeline. Hour-of-day windows
// take each same-day displacement in the hour of its earlier event; all other
// windows only use consecutive pairs inside one contiguous window interval.
inline void accumulate_windows(std::span<const TimelineEvent> tl, const detail::WindowMapper& map,
                               const LatLon* home, std::vector<WindowAccum>& acc) {
  acc.assign(map.spec.window_count(), WindowAccum{});
  bool prev_ok = false;
  std::uint32_t prev_w = 0;
  std::int64_t prev_iv = 0;
  for (std::size_t k = 0; k < tl.size(); ++k) {
    std::uint32_t w = 0;
    std::int64_t iv = 0;
    const bool ok = map.map(tl[k].timestamp, w, iv);
    if (ok) {
      auto& a = acc[w];
      ++a.events;
      if (home) a.home_sq += detail::square(haversine_km(tl[k].position, *home));
      if (prev_ok && prev_iv == iv &&
          (prev_w == w || map.spec.granularity == Granularity::hour_of_day)) {
        auto& p = acc[prev_w];
        ++p.pairs;
        p.displacement_sq += detail::square(haversine_km(tl[k - 1].position, tl[k].position));
      }
    }
    prev_ok = ok;
    prev_w = w;
    prev_iv = iv;
  }
}

inline MetricRow finish_row(std::uint32_t ego, std::uint32_t window, const WindowAccum& a,
                            bool has_home, MobilityNormalization norm) {
  MetricRow r;
  r.ego = ego;
  r.window = window;
  r.A = a.events;
  r.pairs = a.pairs;
  r.has_home = has_home;
  if (a.pairs > 0) {
    const double denom = norm == MobilityNormalization::by_activity ? a.events : a.pairs;
    r.M = std::sqrt(a.displacement_sq / denom);
  }
  if (has_home && a.events > 0) r.Rg = std::sqrt(a.home_sq / a.events);
  return r;
}

struct MetricsOptions {
  MobilityNormalization normalization = MobilityNormalization::by_activity;
  unsigned threads = 1;
  std::size_t block = 2048;  // egos per work unit
};

// Streams rows in (ego, window) order to sink(span<const MetricRow>), one block
// of egos at a time. `homes` is indexed by timeline position; an empty span
// means no homes (every row flagged).
template <typename Sink>
void for_each_metric_rows(const Timelines& tl, std::span<const std::optional<LatLon>> homes,
                          const WindowSpec& spec, const MetricsOptions& opt, Sink&& sink) {
  spec.validate();
  const detail::WindowMapper map(spec);
  const std::size_t per_ego = spec.window_count();
  const std::size_t round = std::max<std::size_t>(1, opt.block) * std::max(1u, opt.threads);
  std::vector<MetricRow> rows;
  for (std::size_t first = 0; first < tl.size(); first += round) {
    const std::size_t last = std::min(tl.size(), first + round);
    rows.assign((last - first) * per_ego, MetricRow{});
    parallel_ranges(last - first, opt.threads, [&](std::size_t b, std::size_t e) {
      std::vector<WindowAccum> acc;
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t ego = first + k;
        const LatLon* home = (ego < homes.size() && homes[ego]) ? &*homes[ego] : nullptr;
        accumulate_windows(tl.events(ego), map, home, acc);
        for (std::size_t w = 0; w < per_ego; ++w)
          rows[k * per_ego + w] = finish_row(static_cast<std::uint32_t>(ego),
                                             static_cast<std::uint32_t>(w), acc[w],
                                             home != nullptr, opt.normalization);
      }
    });
    sink(std::span<const MetricRow>(rows));
  }
}

inline std::vector<MetricRow> metrics_table(const Timelines& tl,
                                            std::span<const std::optional<LatLon>> homes,
                                            const WindowSpec& spec,
                                            const MetricsOptions& opt = {}) {
  std::vector<MetricRow> out;
  out.reserve(tl.size() * spec.window_count());
  for_each_metric_rows(tl, homes, spec, opt,
                       [&](std::span<const MetricRow> r) { out.insert(out.end(), r.begin(), r.end()); });
  return out;
}

// ---------------------------------------------------------------------------
// CSV: ego_id,window,A,M_km,Rg_km,pairs  (Rg_km empty on flagged rows)

inline constexpr std::string_view kMetricsHeader = "ego_id,window,A,M_km,Rg_km,pairs";

inline void append_metric_row(std::string& b, std::string_view ego, std::string_view window,
                              const MetricRow& r) {
  b.append(ego);
  b.push_back(',');
  b.append(window);
  b.push_back(',');
  b.append(std::to_string(r.A));
  b.push_back(',');
  append_double(b, r.M);
  b.push_back(',');
  if (r.has_home) append_double(b, r.Rg);
  b.push_back(',');
  b.append(std::to_string(r.pairs));
  b.push_back('\n');
}

// Metric rows read back from CSV, ego ids interned in ascending order.
struct MetricTable {
  WindowSpec spec;
  std::vector<std::string> egos;
  std::vector<MetricRow> rows;
};

inline std::optional<std::uint32_t> parse_window_label(const WindowSpec& spec, std::string_view s) {
  const std::size_t n = spec.window_count();
  for (std::size_t w = 0; w < n; ++w)
    if (spec.label(w) == s) return static_cast<std::uint32_t>(w);
  return std::nullopt;
}

inline Granularity infer_granularity(std::string_view label) {
  if (label.size() == 3 && label[0] == 'h') return Granularity::hour_of_day;
  if (label.size() == 3) return Granularity::day_of_week;
  if (label.size() == 10) return Granularity::calendar_day;
  if (label.size() == 7) return Granularity::calendar_month;
  if (label.size() == 4) return Granularity::whole_year;
  throw DataError("unrecognised metric window label: " + std::string(label));
}

inline MetricTable read_metrics_csv(const std::string& path, int year) {
  auto in = open_input(path);
  MetricTable t;
  t.spec.year = year;
  std::string line;
  std::vector<std::string_view> f;
  bool header = true;
  bool spec_known = false;
  std::vector<std::string> labels;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      header = false;
      if (line.rfind("ego_id", 0) == 0) continue;
    }
    if (trim(line).empty()) continue;
    split_fields(line, ',', f);
    const auto where = [&] { return path + ":" + std::to_string(lineno); };
    if (f.size() != 6) throw DataError(where() + ": expected 6 metric columns");
    if (!spec_known) {
      t.spec.granularity = infer_granularity(f[1]);
      for (std::size_t w = 0; w < t.spec.window_count(); ++w) labels.push_back(t.spec.label(w));
      spec_known = true;
    }
    if (t.egos.empty() || t.egos.back() != f[0]) {
      if (!t.egos.empty() && f[0] < t.egos.back())
        throw DataError(where() + ": metric rows not sorted by ego");
      t.egos.emplace_back(f[0]);
    }
    MetricRow r;
    r.ego = static_cast<std::uint32_t>(t.egos.size() - 1);
    auto w = std::find(labels.begin(), labels.end(), f[1]);
    if (w == labels.end()) throw DataError(where() + ": window label does not match the file");
    r.window = static_cast<std::uint32_t>(w - labels.begin());
    const auto a = parse_int<std::uint32_t>(f[2]);
    const auto m = parse_double(f[3]);
    const auto p = parse_int<std::uint32_t>(f[5]);
    if (!a || !m || !p) throw DataError(where() + ": malformed metric row");
    r.A = *a;
    r.M = *m;
    r.pairs = *p;
    if (f[4].empty()) {
      r.has_home = false;
    } else {
      const auto rg = parse_double(f[4]);
      if (!rg) throw DataError(where() + ": malformed Rg");
      r.Rg = *rg;
    }
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace cdrmob
