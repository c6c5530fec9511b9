#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond plain value types.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cdrmob/ingest.hpp"

namespace oracle {

inline constexpr double kRadiusKm = 6371.0088;

// Central angle from the chord between unit vectors.
inline double chord_km(cdrmob::LatLon p, cdrmob::LatLon q) {
  const auto unit = [](cdrmob::LatLon a) {
    const double la = a.lat * std::numbers::pi / 180.0, lo = a.lon * std::numbers::pi / 180.0;
    return std::array<long double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
  };
  const auto u = unit(p), v = unit(q);
  const long double cx = u[1] * v[2] - u[2] * v[1];
  const long double cy = u[2] * v[0] - u[0] * v[2];
  const long double cz = u[0] * v[1] - u[1] * v[0];
  const long double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return static_cast<double>(kRadiusKm * std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot));
}

struct Window {
  std::int64_t start, end;
};

inline bool in(const cdrmob::TimelineEvent& e, Window w) { return e.timestamp >= w.start && e.timestamp < w.end; }

inline std::uint64_t activity(std::span<const cdrmob::TimelineEvent> tl, Window w) {
  std::uint64_t n = 0;
  for (const auto& e : tl) n += in(e, w);
  return n;
}

// Consecutive in-window events, by scanning the whole timeline.
inline double mobility(std::span<const cdrmob::TimelineEvent> tl, Window w) {
  std::vector<cdrmob::LatLon> pts;
  for (const auto& e : tl)
    if (in(e, w)) pts.push_back(e.position);
  if (pts.size() < 2) return 0.0;
  long double sum = 0;
  for (std::size_t a = 0; a + 1 < pts.size(); ++a) {
    const long double d = chord_km(pts[a], pts[a + 1]);
    sum += d * d;
  }
  return static_cast<double>(std::sqrt(sum / pts.size()));
}

inline double rg(std::span<const cdrmob::TimelineEvent> tl, cdrmob::LatLon home, Window w) {
  long double sum = 0;
  std::size_t n = 0;
  for (const auto& e : tl)
    if (in(e, w)) {
      const long double d = chord_km(e.position, home);
      sum += d * d;
      ++n;
    }
  return n ? static_cast<double>(std::sqrt(sum / n)) : 0.0;
}

// Rank = 1 + #larger + (#equal others) / 2.
inline std::vector<double> descending_ranks(std::span<const double> v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t larger = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] > v[i]) ++larger;
      if (j != i && v[j] == v[i]) ++equal;
    }
    r[i] = 1.0 + larger + equal / 2.0;
  }
  return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  long double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = descending_ranks(x), ry = descending_ranks(y);
  return pearson(rx, ry);
}

inline std::pair<int, int> cell(cdrmob::LatLon p, cdrmob::LatLon origin, double step) {
  return {static_cast<int>(std::floor((p.lat - origin.lat) / step)),
          static_cast<int>(std::floor((p.lon - origin.lon) / step))};
}

// Least-squares slope of log(y) against log(rank) for ranks > head.
inline double tail_exponent(std::vector<double> d, std::size_t head) {
  std::sort(d.begin(), d.end(), std::greater<>());
  std::vector<double> x, y;
  for (std::size_t k = head; k < d.size(); ++k) {
    x.push_back(std::log(static_cast<double>(k + 1)));
    y.push_back(std::log(d[k]));
  }
  long double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return static_cast<double>(-sxy / sxx);
}

}  // namespace oracle
