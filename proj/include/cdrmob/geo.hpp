#pragma once

// Great-circle distance, lattice binning and coordinate averaging.
//
// Longitudes are averaged arithmetically; coordinates are assumed to stay
// well away from the antimeridian.

#include <algorithm>
#include <cmath>
#include <compare>
#include <numbers>
#include <span>
#include <stdexcept>

namespace cdrmob {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

inline bool valid_coordinate(LatLon p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

constexpr double deg2rad(double d) noexcept { return d * std::numbers::pi / 180.0; }

inline double haversine_km(LatLon p, LatLon q) noexcept {
  const double phi1 = deg2rad(p.lat);
  const double phi2 = deg2rad(q.lat);
  const double s_dphi = std::sin((phi2 - phi1) / 2.0);
  const double s_dlam = std::sin(deg2rad(q.lon - p.lon) / 2.0);
  double h = s_dphi * s_dphi + std::cos(phi1) * std::cos(phi2) * s_dlam * s_dlam;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

struct CellIndex {
  int i = 0;  // latitude band
  int j = 0;  // longitude band
  auto operator<=>(const CellIndex&) const = default;
};

struct GridSpec {
  double lat_step = 0.05;
  double lon_step = 0.05;
  LatLon origin{};  // lower-left anchor of cell (0, 0)

  void validate() const {
    if (!(lat_step > 0.0) || !(lon_step > 0.0) || !std::isfinite(lat_step) ||
        !std::isfinite(lon_step))
      throw std::invalid_argument("grid steps must be positive");
  }
};

namespace detail {

// Band index of offset/step. Values within 1e-9 of a band edge snap to the
// upper band so that points printed on a boundary land where the decimal
// value says they are.
inline int band_of(double offset, double step) noexcept {
  const double q = offset / step;
  return static_cast<int>(std::floor(q + 1e-9));
}

}  // namespace detail

// Half-open cells: [lat0 + i*step, lat0 + (i+1)*step).
inline CellIndex cell_of(LatLon p, const GridSpec& spec) noexcept {
  return {detail::band_of(p.lat - spec.origin.lat, spec.lat_step),
          detail::band_of(p.lon - spec.origin.lon, spec.lon_step)};
}

inline LatLon cell_lower_left(CellIndex c, const GridSpec& spec) noexcept {
  return {spec.origin.lat + c.i * spec.lat_step, spec.origin.lon + c.j * spec.lon_step};
}

inline LatLon cell_center(CellIndex c, const GridSpec& spec) noexcept {
  return {spec.origin.lat + (c.i + 0.5) * spec.lat_step,
          spec.origin.lon + (c.j + 0.5) * spec.lon_step};
}

// Exact spherical area of a lat/lon rectangle.
inline double cell_area_km2(CellIndex c, const GridSpec& spec) noexcept {
  const LatLon ll = cell_lower_left(c, spec);
  const double lat1 = deg2rad(ll.lat);
  const double lat2 = deg2rad(ll.lat + spec.lat_step);
  return kEarthRadiusKm * kEarthRadiusKm * deg2rad(spec.lon_step) *
         std::abs(std::sin(lat2) - std::sin(lat1));
}

// Great-circle length of the cell diagonal (an upper bound on intra-cell distances
// for cells this small).
inline double cell_diameter_km(CellIndex c, const GridSpec& spec) noexcept {
  const LatLon ll = cell_lower_left(c, spec);
  const LatLon ur{ll.lat + spec.lat_step, ll.lon + spec.lon_step};
  const LatLon lr{ll.lat, ll.lon + spec.lon_step};
  const LatLon ul{ll.lat + spec.lat_step, ll.lon};
  return std::max(haversine_km(ll, ur), haversine_km(lr, ul));
}

inline LatLon mean_position(std::span<const LatLon> points) {
  if (points.empty()) throw std::invalid_argument("mean_position of an empty sequence");
  double lat = 0.0;
  double lon = 0.0;
  for (const LatLon& p : points) {
    lat += p.lat;
    lon += p.lon;
  }
  const auto n = static_cast<double>(points.size());
  return {lat / n, lon / n};
}

// Grid with the given steps anchored at the integer-degree floor of `min_corner`.
inline GridSpec grid_anchored_at(LatLon min_corner, double lat_step, double lon_step) {
  GridSpec spec{lat_step, lon_step, {std::floor(min_corner.lat), std::floor(min_corner.lon)}};
  spec.validate();
  return spec;
}

}  // namespace cdrmob
