#pragma once

// Population daily profile, its two-peak Gaussian fit, the night-time
// inactivity window, and per-individual home locations.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdrmob/ingest.hpp"
#include "cdrmob/metrics.hpp"
#include "cdrmob/parallel.hpp"

namespace cdrmob {

enum class ProfileMetric { activity, mobility, rg };

inline std::string_view to_string(ProfileMetric m) noexcept {
  switch (m) {
    case ProfileMetric::activity: return "activity";
    case ProfileMetric::mobility: return "mobility";
    case ProfileMetric::rg: return "rg";
  }
  return "?";
}

struct DailyProfile {
  int bin_minutes = 60;
  std::vector<double> values;  // bin k starts at k * bin_minutes
  std::size_t individuals = 0;

  std::size_t bins() const noexcept { return values.size(); }
  double bin_hours() const noexcept { return bin_minutes / 60.0; }
};

namespace detail {

inline int bins_per_day(int bin_minutes) {
  if (bin_minutes <= 0 || 1440 % bin_minutes != 0)
    throw std::invalid_argument("profile bin width must divide 24h");
  return 1440 / bin_minutes;
}

// Time-of-day binning with displacements taken within one calendar day and
// credited to the bin of the earlier event.
inline void accumulate_time_of_day(std::span<const TimelineEvent> tl, int bin_minutes,
                                   const YearCalendar& cal, const LatLon* home,
                                   std::vector<WindowAccum>& acc) {
  acc.assign(static_cast<std::size_t>(bins_per_day(bin_minutes)), WindowAccum{});
  const int bin_seconds = bin_minutes * 60;
  for (std::size_t k = 0; k < tl.size(); ++k) {
    const auto ts = tl[k].timestamp;
    if (!cal.contains(ts)) continue;
    auto& a = acc[static_cast<std::size_t>(second_of_day(ts) / bin_seconds)];
    ++a.events;
    if (home) a.home_sq += square(haversine_km(tl[k].position, *home));
    if (k > 0 && cal.contains(tl[k - 1].timestamp) && day_of(tl[k - 1].timestamp) == day_of(ts)) {
      auto& p = acc[static_cast<std::size_t>(second_of_day(tl[k - 1].timestamp) / bin_seconds)];
      ++p.pairs;
      p.displacement_sq += square(haversine_km(tl[k - 1].position, tl[k].position));
    }
  }
}

}  // namespace detail

// Mean over individuals of each individual's per-bin value. The rg profile
// averages over individuals with a home only.
inline DailyProfile daily_profile(const Timelines& tl, ProfileMetric metric, int bin_minutes,
                                  int year, std::span<const std::optional<LatLon>> homes = {},
                                  unsigned threads = 1) {
  if (tl.empty()) throw std::invalid_argument("daily profile of an empty corpus");
  const int nb = detail::bins_per_day(bin_minutes);
  const YearCalendar cal(year);
  constexpr std::size_t kBlock = 1024;
  const std::size_t nblocks = (tl.size() + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> partial(nblocks, std::vector<double>(static_cast<std::size_t>(nb), 0.0));
  std::vector<std::size_t> counted(nblocks, 0);
  parallel_blocks(tl.size(), kBlock, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    std::vector<WindowAccum> acc;
    for (std::size_t k = begin; k < end; ++k) {
      const LatLon* home = (k < homes.size() && homes[k]) ? &*homes[k] : nullptr;
      if (metric == ProfileMetric::rg && !home) continue;
      detail::accumulate_time_of_day(tl.events(k), bin_minutes, cal, home, acc);
      ++counted[b];
      for (std::size_t w = 0; w < acc.size(); ++w) {
        const auto& a = acc[w];
        double v = 0.0;
        if (metric == ProfileMetric::activity) v = a.events;
        else if (metric == ProfileMetric::mobility) v = a.pairs > 0 ? std::sqrt(a.displacement_sq / a.events) : 0.0;
        else v = a.events > 0 ? std::sqrt(a.home_sq / a.events) : 0.0;
        partial[b][w] += v;
      }
    }
  });
  DailyProfile p;
  p.bin_minutes = bin_minutes;
  p.values.assign(static_cast<std::size_t>(nb), 0.0);
  for (std::size_t b = 0; b < nblocks; ++b) {
    p.individuals += counted[b];
    for (std::size_t w = 0; w < p.values.size(); ++w) p.values[w] += partial[b][w];
  }
  if (p.individuals > 0)
    for (double& v : p.values) v /= static_cast<double>(p.individuals);
  return p;
}

// ---------------------------------------------------------------------------
// Two-peak Gaussian fit

struct GaussianPeak {
  double mu = 0.0;     // hours, time of day
  double sigma = 0.0;  // hours
  double amplitude = 0.0;  // integrated mass of the component
};

struct BimodalFit {
  GaussianPeak day;
  GaussianPeak evening;
  double baseline = 0.0;  // per hour
  double residual_norm = 0.0;
  int iterations = 0;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Parameter vector: amp_d, mu_d, sigma_d, amp_e, mu_e, sigma_e, baseline.
using FitParams = Eigen::Matrix<double, 7, 1>;

struct BinnedMixture {
  std::span<const double> values;
  double width;  // hours per bin

  double lo(std::size_t k) const noexcept { return static_cast<double>(k) * width; }

  void evaluate(const FitParams& p, Eigen::VectorXd& model, Eigen::MatrixXd* jac) const {
    const auto n = static_cast<Eigen::Index>(values.size());
    model.resize(n);
    if (jac) jac->resize(n, 7);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double a = lo(static_cast<std::size_t>(k));
      const double b = a + width;
      double m = p(6) * width;
      if (jac) (*jac)(k, 6) = width;
      for (int c = 0; c < 2; ++c) {
        const double amp = p(3 * c);
        const double mu = p(3 * c + 1);
        const double sg = p(3 * c + 2);
        const double za = (a - mu) / sg;
        const double zb = (b - mu) / sg;
        const double mass = normal_cdf(zb) - normal_cdf(za);
        m += amp * mass;
        if (jac) {
          const double pa = normal_pdf(za);
          const double pb = normal_pdf(zb);
          (*jac)(k, 3 * c) = mass;
          (*jac)(k, 3 * c + 1) = -amp * (pb - pa) / sg;
          (*jac)(k, 3 * c + 2) = -amp * (pb * zb - pa * za) / sg;
        }
      }
      model(k) = m;
    }
  }
};

inline void clamp_params(FitParams& p) {
  for (int c = 0; c < 2; ++c) {
    p(3 * c) = std::max(p(3 * c), 0.0);
    p(3 * c + 1) = std::clamp(p(3 * c + 1), 0.0, 24.0);
    p(3 * c + 2) = std::clamp(p(3 * c + 2), 0.1, 12.0);
  }
  p(6) = std::max(p(6), 0.0);
}

// Bounded Levenberg-Marquardt (steps projected back onto the box).
inline std::pair<FitParams, int> levenberg_marquardt(const BinnedMixture& f, FitParams p,
                                                     double& ssr) {
  const Eigen::Map<const Eigen::VectorXd> y(f.values.data(),
                                            static_cast<Eigen::Index>(f.values.size()));
  Eigen::VectorXd model;
  Eigen::MatrixXd J;
  f.evaluate(p, model, &J);
  Eigen::VectorXd r = y - model;
  ssr = r.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  for (; it < 500; ++it) {
    const Eigen::Matrix<double, 7, 7> JtJ = J.transpose() * J;
    const FitParams g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::Matrix<double, 7, 7> A = JtJ;
      for (int d = 0; d < 7; ++d) A(d, d) += lambda * std::max(JtJ(d, d), 1e-12);
      const FitParams step = A.ldlt().solve(g);
      FitParams trial = p + step;
      clamp_params(trial);
      Eigen::VectorXd tm;
      f.evaluate(trial, tm, nullptr);
      const double trial_ssr = (y - tm).squaredNorm();
      if (trial_ssr < ssr) {
        const double gain = ssr - trial_ssr;
        p = trial;
        f.evaluate(p, model, &J);
        r = y - model;
        const double old = ssr;
        ssr = trial_ssr;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (gain <= 1e-15 * std::max(old, 1e-300)) return {p, it + 1};
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  return {p, it};
}

}  // namespace detail

// Fits amp_d*G(mu_d, sigma_d) + amp_e*G(mu_e, sigma_e) + baseline to the binned
// profile (each bin compared with the component mass inside it). Time runs
// linearly over [0, 24).
inline BimodalFit fit_bimodal(const DailyProfile& profile) {
  const auto& v = profile.values;
  const std::size_t n = v.size();
  const std::size_t nonzero = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; }));
  if (nonzero < 8) throw FitError("profile has fewer than 8 non-zero bins");
  const double vmax = *std::max_element(v.begin(), v.end());
  const double w = profile.bin_hours();

  std::vector<std::size_t> peaks;
  for (std::size_t k = 0; k < n; ++k) {
    const double left = k > 0 ? v[k - 1] : -1.0;
    const double right = k + 1 < n ? v[k + 1] : -1.0;
    if (v[k] > left && v[k] >= right && v[k] >= 0.1 * vmax) peaks.push_back(k);
  }
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
    return v[a] != v[b] ? v[a] > v[b] : a < b;
  });
  // Second peak: highest one at least 2 h away with a real valley in between.
  std::optional<std::size_t> second;
  if (!peaks.empty()) {
    const std::size_t p1 = peaks.front();
    for (std::size_t q = 1; q < peaks.size() && !second; ++q) {
      const std::size_t p2 = peaks[q];
      const std::size_t lo = std::min(p1, p2), hi = std::max(p1, p2);
      if ((hi - lo) * w < 2.0) continue;
      const double valley = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo),
                                              v.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
      if (valley < 0.98 * std::min(v[p1], v[p2])) second = p2;
    }
  }
  if (!second) throw FitError("unimodal profile: no second separated peak");
  std::size_t pd = peaks.front(), pe = *second;
  if (pd > pe) std::swap(pd, pe);

  const detail::BinnedMixture model{v, w};
  const double base0 = *std::min_element(v.begin(), v.end()) / w;
  std::optional<BimodalFit> best;
  double best_ssr = 0.0;
  for (double s0 : {1.0, 2.0, 3.5}) {
    detail::FitParams p;
    const auto amp = [&](std::size_t k) {
      return std::max(v[k] - base0 * w, 1e-9) * s0 * std::sqrt(2.0 * std::numbers::pi) / w;
    };
    p << amp(pd), (pd + 0.5) * w, s0, amp(pe), (pe + 0.5) * w, s0, base0;
    double ssr = 0.0;
    auto [fit, iters] = detail::levenberg_marquardt(model, p, ssr);
    if (best && ssr >= best_ssr) continue;
    BimodalFit r;
    r.day = {fit(1), fit(2), fit(0)};
    r.evening = {fit(4), fit(5), fit(3)};
    if (r.day.mu > r.evening.mu) std::swap(r.day, r.evening);
    r.baseline = fit(6);
    r.residual_norm = std::sqrt(ssr);
    r.iterations = iters;
    best = r;
    best_ssr = ssr;
  }
  if (!(best->day.amplitude > 0.0) || !(best->evening.amplitude > 0.0) ||
      !(best->day.mu < best->evening.mu))
    throw FitError("degenerate two-peak fit");
  return *best;
}

// Expected mass of a fitted mixture in [a, b) hours.
inline double mixture_mass(const BimodalFit& f, double a, double b) {
  double m = f.baseline * (b - a);
  for (const auto& g : {f.day, f.evening})
    m += g.amplitude * (detail::normal_cdf((b - g.mu) / g.sigma) - detail::normal_cdf((a - g.mu) / g.sigma));
  return m;
}

// ---------------------------------------------------------------------------
// Inactivity window

// Half-open time-of-day interval, possibly wrapping past midnight.
struct InactiveWindow {
  int start_minute = 60;
  int end_minute = 420;

  bool contains_second(int sod) const noexcept {
    const int m = sod / 60;
    if (start_minute <= end_minute) return m >= start_minute && m < end_minute;
    return m >= start_minute || m < end_minute;
  }
  bool contains(std::int64_t ts) const noexcept { return contains_second(second_of_day(ts)); }

  std::string label() const {
    return format_clock(start_minute) + "-" + format_clock(end_minute);
  }
  bool operator==(const InactiveWindow&) const = default;

  // "HH:MM-HH:MM"
  static std::optional<InactiveWindow> parse(std::string_view s) {
    if (s.size() != 11 || s[5] != '-') return std::nullopt;
    const auto a = parse_clock(s.substr(0, 5));
    const auto b = parse_clock(s.substr(6, 5));
    if (!a || !b || *a == *b || *a >= 1440) return std::nullopt;
    return InactiveWindow{*a, *b};
  }
};

// Contiguous circular window of `width_hours` with the least profile mass.
// Near-equal sums (relative 1e-12) count as ties, broken by the earliest start.
inline InactiveWindow find_inactive_window(const DailyProfile& p, double width_hours = 6.0) {
  const std::size_t n = p.bins();
  const double wb = width_hours * 60.0 / p.bin_minutes;
  const auto width = static_cast<std::size_t>(std::llround(wb));
  if (n == 0 || std::abs(wb - static_cast<double>(width)) > 1e-9 || width == 0 || width >= n)
    throw std::invalid_argument("window width must be a positive whole number of bins below 24h");
  std::vector<double> sums(n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t k = 0; k < width; ++k) sums[s] += p.values[(s + k) % n];
  const double lo = *std::min_element(sums.begin(), sums.end());
  const double tol = std::abs(lo) * 1e-12 + 1e-300;
  std::size_t start = 0;
  while (sums[start] > lo + tol) ++start;
  const int sm = static_cast<int>(start) * p.bin_minutes;
  const int em = (sm + static_cast<int>(width) * p.bin_minutes) % 1440;
  return {sm, em};
}

// ---------------------------------------------------------------------------
// Homes

struct HomeLocation {
  LatLon position{};
  std::uint32_t support = 0;  // night events averaged
  bool at_sea = false;        // lands in a grid cell holding no observed tower
};

// Mean position of every event whose clock time falls in `window`, over the
// whole timeline; nullopt with fewer than `min_support` such events.
inline std::optional<HomeLocation> compute_home(std::span<const TimelineEvent> tl,
                                                const InactiveWindow& window,
                                                std::uint32_t min_support = 1) {
  double lat = 0.0, lon = 0.0;
  std::uint32_t n = 0;
  for (const auto& e : tl)
    if (window.contains(e.timestamp)) {
      lat += e.position.lat;
      lon += e.position.lon;
      ++n;
    }
  if (n == 0 || n < min_support) return std::nullopt;
  return HomeLocation{{lat / n, lon / n}, n, false};
}

inline std::vector<std::optional<HomeLocation>> compute_homes(const Timelines& tl,
                                                              const InactiveWindow& window,
                                                              std::uint32_t min_support = 1,
                                                              unsigned threads = 1) {
  std::vector<std::optional<HomeLocation>> homes(tl.size());
  parallel_for(tl.size(), threads, [&](std::size_t k) { homes[k] = compute_home(tl.events(k), window, min_support); });
  return homes;
}

}  // namespace cdrmob
