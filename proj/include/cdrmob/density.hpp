#pragma once

// Home-based population density grid, descending ranks, rank correlations,
// rank-size tail fits and the five density areas.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdrmob/geo.hpp"
#include "cdrmob/text.hpp"

namespace cdrmob {

class StatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridDensity {
  GridSpec spec;
  std::map<CellIndex, std::uint32_t> counts;
  std::uint64_t total = 0;

  double density(CellIndex c, std::uint32_t count) const { return count / cell_area_km2(c, spec); }
  double density(CellIndex c) const {
    const auto it = counts.find(c);
    return it == counts.end() ? 0.0 : density(c, it->second);
  }
};

inline GridDensity build_density(std::span<const LatLon> homes, const GridSpec& spec) {
  spec.validate();
  GridDensity g;
  g.spec = spec;
  for (const LatLon& h : homes) ++g.counts[cell_of(h, spec)];
  g.total = homes.size();
  return g;
}

// ---------------------------------------------------------------------------
// Ranks and correlations

// Rank 1 for the largest value; tied values share the mean of their ranks.
inline std::vector<double> descending_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation of unequal lengths");
  if (x.size() < 3) throw StatError("correlation undefined for fewer than 3 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx, dy = y[k] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw StatError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman correlation of precomputed rank vectors.
inline double spearman_ranks(std::span<const double> rx, std::span<const double> ry) { return pearson(rx, ry); }

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation of unequal lengths");
  const auto rx = descending_ranks(x);
  const auto ry = descending_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Ranked cells

enum class CellMetric { activity, mobility, rg };

inline std::string_view to_string(CellMetric m) noexcept {
  switch (m) {
    case CellMetric::activity: return "A";
    case CellMetric::mobility: return "M";
    case CellMetric::rg: return "Rg";
  }
  return "?";
}

// Means over the egos homed in a cell.
struct CellMeans {
  double A = 0.0;
  double M = 0.0;
  double Rg = 0.0;
  std::uint32_t egos = 0;
};

struct EgoValues {
  LatLon home;
  double A = 0.0;
  double M = 0.0;
  double Rg = 0.0;
};

inline std::map<CellIndex, CellMeans> cell_means(std::span<const EgoValues> egos, const GridSpec& spec) {
  std::map<CellIndex, CellMeans> out;
  for (const auto& e : egos) {
    auto& c = out[cell_of(e.home, spec)];
    c.A += e.A;
    c.M += e.M;
    c.Rg += e.Rg;
    ++c.egos;
  }
  for (auto& [cell, c] : out) {
    c.A /= c.egos;
    c.M /= c.egos;
    c.Rg /= c.egos;
  }
  return out;
}

struct RankedCell {
  CellIndex cell;
  std::uint32_t count = 0;
  double density = 0.0;
  double rank = 0.0;  // R_rho
  CellMeans means;
  double rank_A = 0.0, rank_M = 0.0, rank_Rg = 0.0;

  double value(CellMetric m) const noexcept {
    return m == CellMetric::activity ? means.A : m == CellMetric::mobility ? means.M : means.Rg;
  }
  double metric_rank(CellMetric m) const noexcept {
    return m == CellMetric::activity ? rank_A : m == CellMetric::mobility ? rank_M : rank_Rg;
  }
};

struct RankedCells {
  GridSpec spec;
  std::vector<RankedCell> cells;  // ascending density rank, then cell index

  std::vector<double> density_ranks() const {
    std::vector<double> r(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) r[k] = cells[k].rank;
    return r;
  }
  std::vector<double> metric_ranks(CellMetric m) const {
    std::vector<double> r(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) r[k] = cells[k].metric_rank(m);
    return r;
  }
  double correlation(CellMetric m) const { return spearman_ranks(density_ranks(), metric_ranks(m)); }
};

// Cells without metric means (no homed ego with metrics) get zero means.
inline RankedCells rank_cells(const GridDensity& grid, const std::map<CellIndex, CellMeans>& means = {}) {
  RankedCells r;
  r.spec = grid.spec;
  for (const auto& [cell, count] : grid.counts) {
    if (count == 0) continue;
    RankedCell c;
    c.cell = cell;
    c.count = count;
    c.density = grid.density(cell, count);
    if (const auto it = means.find(cell); it != means.end()) c.means = it->second;
    r.cells.push_back(c);
  }
  const auto column = [&](auto get) {
    std::vector<double> v(r.cells.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = get(r.cells[k]);
    return descending_ranks(v);
  };
  const auto rd = column([](const RankedCell& c) { return c.density; });
  const auto ra = column([](const RankedCell& c) { return c.means.A; });
  const auto rm = column([](const RankedCell& c) { return c.means.M; });
  const auto rg = column([](const RankedCell& c) { return c.means.Rg; });
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    r.cells[k].rank = rd[k];
    r.cells[k].rank_A = ra[k];
    r.cells[k].rank_M = rm[k];
    r.cells[k].rank_Rg = rg[k];
  }
  std::stable_sort(r.cells.begin(), r.cells.end(),
                   [](const RankedCell& a, const RankedCell& b) { return a.rank < b.rank; });
  return r;
}

// ---------------------------------------------------------------------------
// Density-windowed correlation

struct Band {
  double lo = 0.0;  // density-rank band [lo, hi)
  double hi = 0.0;
  std::size_t cells = 0;
  std::optional<double> rho;
  std::string note;  // why rho is absent

  double center() const noexcept { return std::sqrt(lo * hi); }
};

// Bands [2^(k/2), 2^(k/2+1)): each spans a factor of 2 in rank and overlaps
// the next by half. Correlations are recomputed from ranks inside the band.
inline std::vector<Band> sliding_correlation(const RankedCells& ranked, CellMetric metric,
                                             std::size_t min_cells = 3) {
  std::vector<Band> out;
  if (ranked.cells.empty()) return out;
  const double max_rank = ranked.cells.back().rank;
  for (int k = 0;; ++k) {
    Band b;
    b.lo = std::pow(2.0, k / 2.0);
    b.hi = 2.0 * b.lo;
    if (b.lo > max_rank) break;
    std::vector<double> dens, vals;
    for (const auto& c : ranked.cells)
      if (c.rank >= b.lo && c.rank < b.hi) {
        dens.push_back(c.density);
        vals.push_back(c.value(metric));
      }
    b.cells = dens.size();
    if (b.cells < std::max<std::size_t>(min_cells, 3)) {
      b.note = "too few cells";
    } else {
      try {
        b.rho = spearman(dens, vals);
      } catch (const StatError& e) {
        b.note = e.what();
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Estimated rank where the band correlation turns from negative (denser side)
// to positive: the split between consecutive populated bands that agrees with
// the most band signs. nullopt when no band has a correlation.
inline std::optional<double> sign_change_rank(std::span<const Band> bands) {
  std::vector<const Band*> valid;
  for (const auto& b : bands)
    if (b.rho) valid.push_back(&b);
  if (valid.size() < 2) return std::nullopt;
  std::size_t best_split = 1, best_score = 0;
  for (std::size_t s = 1; s < valid.size(); ++s) {
    std::size_t score = 0;
    for (std::size_t k = 0; k < valid.size(); ++k) score += (k < s) == (*valid[k]->rho < 0.0);
    if (score > best_score) {
      best_score = score;
      best_split = s;
    }
  }
  return std::sqrt(valid[best_split - 1]->center() * valid[best_split]->center());
}

// ---------------------------------------------------------------------------
// Rank-size

struct PowerLawFit {
  double exponent = 0.0;  // density ~ rank^-exponent
  double intercept = 0.0;  // log density at rank 1
  double r2 = 0.0;
  std::size_t rank_min = 0, rank_max = 0;
};

struct RankSize {
  std::vector<double> densities;  // index k holds rank k+1
  std::optional<PowerLawFit> fit;
  std::string note;
};

inline RankSize rank_size(const GridDensity& grid, std::size_t head = 100, std::size_t min_cells = 200) {
  RankSize r;
  for (const auto& [cell, count] : grid.counts)
    if (count > 0) r.densities.push_back(grid.density(cell, count));
  std::sort(r.densities.begin(), r.densities.end(), std::greater<>());
  if (r.densities.size() < min_cells || r.densities.size() <= head + 2) {
    r.note = "too few inhabited cells for a tail fit";
    return r;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const std::size_t first = head;  // 0-based index of rank head+1
  const double n = static_cast<double>(r.densities.size() - first);
  for (std::size_t k = first; k < r.densities.size(); ++k) {
    const double x = std::log(static_cast<double>(k + 1));
    const double y = std::log(r.densities[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  PowerLawFit f;
  const double slope = cxy / vx;
  f.exponent = -slope;
  f.intercept = (sy - slope * sx) / n;
  f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
  f.rank_min = head + 1;
  f.rank_max = r.densities.size();
  r.fit = f;
  return r;
}

// ---------------------------------------------------------------------------
// Areas

inline constexpr std::size_t kAreaCount = 5;
inline constexpr std::array<double, kAreaCount> kReferenceAreaDensity{1252.9, 418.7, 83.2, 10.0, 1.5};

struct AreaBounds {
  std::array<double, 4> upper{30, 100, 1000, 10000};  // inclusive rank bound of Areas 1..4

  void validate() const {
    for (std::size_t k = 0; k < upper.size(); ++k) {
      if (!(upper[k] > 0)) throw std::invalid_argument("area bounds must be positive");
      if (k > 0 && !(upper[k] > upper[k - 1])) throw std::invalid_argument("area bounds must be strictly increasing");
    }
  }

  // 0-based area index (0 = Area 1).
  int area_of(double rank) const noexcept {
    int a = 0;
    while (a < 4 && rank > upper[static_cast<std::size_t>(a)]) ++a;
    return a;
  }

  // "r1,r2,r3,r4"
  static AreaBounds parse(std::string_view s) {
    std::vector<std::string_view> parts;
    split_fields(s, ',', parts);
    if (parts.size() != 4) throw std::invalid_argument("area bounds need four comma-separated ranks");
    AreaBounds b;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = parse_double(trim(parts[k]));
      if (!v) throw std::invalid_argument("bad area bound '" + std::string(parts[k]) + "'");
      b.upper[k] = *v;
    }
    b.validate();
    return b;
  }
};

inline std::string area_name(int a) { return "Area" + std::to_string(a + 1); }

struct AreaMap {
  GridSpec spec;
  std::map<CellIndex, int> labels;

  std::optional<int> area_of(LatLon p) const {
    const auto it = labels.find(cell_of(p, spec));
    if (it == labels.end()) return std::nullopt;
    return it->second;
  }
};

inline AreaMap classify_areas(const RankedCells& ranked, const AreaBounds& bounds) {
  bounds.validate();
  AreaMap m;
  m.spec = ranked.spec;
  for (const auto& c : ranked.cells) m.labels[c.cell] = bounds.area_of(c.rank);
  return m;
}

struct AreaSummary {
  int area = 0;
  double rank_lo = 0.0, rank_hi = 0.0;  // observed density ranks
  std::size_t cells = 0;
  std::uint64_t egos = 0;
  double mean_density = 0.0;       // coarse grid, per km2
  std::size_t fine_cells = 0;
  double mean_fine_density = 0.0;  // inhabited fine cells inside the area, per km2
  double reference_density = 0.0;
};

// Fine-grid density is counted from the same homes on a grid of `fine_step`
// sharing the coarse origin.
inline std::vector<AreaSummary> area_table(const RankedCells& ranked, const AreaMap& areas,
                                           std::span<const LatLon> homes, double fine_step = 0.01) {
  std::vector<AreaSummary> out(kAreaCount);
  for (std::size_t a = 0; a < kAreaCount; ++a) {
    out[a].area = static_cast<int>(a);
    out[a].reference_density = kReferenceAreaDensity[a];
  }
  for (const auto& c : ranked.cells) {
    auto& s = out[static_cast<std::size_t>(areas.labels.at(c.cell))];
    if (s.cells == 0) s.rank_lo = c.rank;
    s.rank_hi = c.rank;
    ++s.cells;
    s.egos += c.count;
    s.mean_density += c.density;
  }
  GridSpec fine{fine_step, fine_step, ranked.spec.origin};
  const GridDensity fg = build_density(homes, fine);
  for (const auto& [cell, count] : fg.counts) {
    const LatLon centre = cell_center(cell, fine);
    const auto a = areas.area_of(centre);
    if (!a) continue;
    auto& s = out[static_cast<std::size_t>(*a)];
    ++s.fine_cells;
    s.mean_fine_density += fg.density(cell, count);
  }
  for (auto& s : out) {
    if (s.cells) s.mean_density /= static_cast<double>(s.cells);
    if (s.fine_cells) s.mean_fine_density /= static_cast<double>(s.fine_cells);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline constexpr std::string_view kGridHeader = "i,j,lat,lon,count,density,rank,area";

inline void write_grid_csv(const std::string& path, const RankedCells& ranked, const AreaMap& areas) {
  CsvWriter w(path);
  w.line(kGridHeader);
  for (const auto& c : ranked.cells) {
    auto& b = w.buffer();
    const LatLon p = cell_center(c.cell, ranked.spec);
    b += std::to_string(c.cell.i);
    b += ',';
    b += std::to_string(c.cell.j);
    b += ',';
    append_double(b, p.lat);
    b += ',';
    append_double(b, p.lon);
    b += ',';
    b += std::to_string(c.count);
    b += ',';
    append_double(b, c.density);
    b += ',';
    append_double(b, c.rank);
    b += ',';
    b += area_name(areas.labels.at(c.cell));
    b += '\n';
    w.maybe_flush();
  }
  w.close();
}

inline void write_bands_csv(const std::string& path,
                            std::span<const std::pair<CellMetric, std::vector<Band>>> profiles) {
  CsvWriter w(path);
  w.line("metric,band_lo,band_hi,center,cells,rho,note");
  for (const auto& [metric, bands] : profiles)
    for (const auto& b : bands) {
      auto& s = w.buffer();
      s += to_string(metric);
      s += ',';
      append_double(s, b.lo);
      s += ',';
      append_double(s, b.hi);
      s += ',';
      append_double(s, b.center());
      s += ',';
      s += std::to_string(b.cells);
      s += ',';
      if (b.rho) append_double(s, *b.rho);
      s += ',';
      s += b.note;
      s += '\n';
    }
  w.close();
}

inline void write_rank_size_csv(const std::string& path, const RankSize& rs) {
  CsvWriter w(path);
  w.line("rank,density");
  for (std::size_t k = 0; k < rs.densities.size(); ++k) {
    auto& s = w.buffer();
    s += std::to_string(k + 1);
    s += ',';
    append_double(s, rs.densities[k]);
    s += '\n';
    w.maybe_flush();
  }
  w.close();
}

inline void write_area_csv(const std::string& path, std::span<const AreaSummary> table) {
  CsvWriter w(path);
  w.line("area,rank_lo,rank_hi,cells,egos,mean_density_km2,fine_cells,mean_fine_density_km2,reference_density_km2");
  for (const auto& a : table) {
    auto& s = w.buffer();
    s += area_name(a.area);
    s += ',';
    append_double(s, a.rank_lo);
    s += ',';
    append_double(s, a.rank_hi);
    s += ',';
    s += std::to_string(a.cells);
    s += ',';
    s += std::to_string(a.egos);
    s += ',';
    append_double(s, a.mean_density);
    s += ',';
    s += std::to_string(a.fine_cells);
    s += ',';
    append_double(s, a.mean_fine_density);
    s += ',';
    append_double(s, a.reference_density);
    s += '\n';
  }
  w.close();
}

}  // namespace cdrmob
