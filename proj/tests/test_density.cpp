#include <gtest/gtest.h>

#include <random>

#include "cdrmob/density.hpp"
#include "cdrmob/synthgen.hpp"
#include "oracles.hpp"

using namespace cdrmob;

namespace {

const GridSpec kGrid{0.05, 0.05, {36.0, 20.0}};

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, int distinct) {
  std::vector<double> v(n);
  for (auto& x : v) x = distinct > 0 ? static_cast<double>(rng() % static_cast<unsigned>(distinct)) : std::ldexp(double(rng() >> 11), -53);
  return v;
}

// Grid with the requested counts in consecutive cells of one row.
GridDensity grid_with_counts(const std::vector<std::uint32_t>& counts) {
  GridDensity g;
  g.spec = kGrid;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    g.counts[{0, static_cast<int>(k)}] = counts[k];
    g.total += counts[k];
  }
  return g;
}

}  // namespace

TEST(BuildDensity, ThreeHomesOneCell) {
  const std::vector<LatLon> homes{{36.01, 20.01}, {36.02, 20.03}, {36.04, 20.04}};
  const auto g = build_density(homes, kGrid);
  ASSERT_EQ(g.counts.size(), 1u);
  EXPECT_EQ(g.counts.at({0, 0}), 3u);
  EXPECT_EQ(g.total, 3u);
  EXPECT_NEAR(g.density({0, 0}), 3.0 / cell_area_km2({0, 0}, kGrid), 1e-12);
}

TEST(BuildDensity, BoundaryHomeGoesToUpperCell) {
  const std::vector<LatLon> homes{{36.05, 20.0}};
  const auto g = build_density(homes, kGrid);
  EXPECT_EQ(g.counts.begin()->first, (CellIndex{1, 0}));
}

TEST(BuildDensity, RandomHomesMatchFloorBinning) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> la(36, 41), lo(20, 28);
  std::vector<LatLon> homes;
  std::map<std::pair<int, int>, std::uint32_t> want;
  for (int k = 0; k < 10000; ++k) {
    homes.push_back({la(rng), lo(rng)});
    ++want[oracle::cell(homes.back(), kGrid.origin, 0.05)];
  }
  const auto g = build_density(homes, kGrid);
  std::map<std::pair<int, int>, std::uint32_t> got;
  std::uint64_t sum = 0;
  for (const auto& [c, n] : g.counts) {
    got[{c.i, c.j}] = n;
    sum += n;
  }
  EXPECT_EQ(got, want);
  EXPECT_EQ(sum, homes.size());
}

TEST(Ranks, Examples) {
  EXPECT_EQ(descending_ranks(std::vector<double>{5, 3, 1}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(descending_ranks(std::vector<double>{5, 5, 1}), (std::vector<double>{1.5, 1.5, 3}));
  EXPECT_EQ(descending_ranks(std::vector<double>{1, 7, 7, 7}), (std::vector<double>{4, 2, 2, 2}));
}

TEST(Ranks, MatchCountingOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_vector(rng, 500, trial % 2 ? 40 : 0);
    EXPECT_EQ(descending_ranks(v), oracle::descending_ranks(v));
  }
}

TEST(Spearman, MonotoneDataIsExactlyOne) {
  std::vector<double> x, up, down;
  for (int k = 0; k < 50; ++k) {
    x.push_back(k * 0.37);
    up.push_back(std::exp(k * 0.1));
    down.push_back(-k * k * 1.0);
  }
  EXPECT_EQ(spearman(x, up), 1.0);
  EXPECT_EQ(spearman(x, down), -1.0);
}

TEST(Spearman, MatchesRankPearsonOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    const auto x = random_vector(rng, n, trial % 3 == 0 ? 5 : 0);
    const auto y = random_vector(rng, n, trial % 2 == 0 ? 4 : 0);
    const double want = oracle::spearman(x, y);
    if (!std::isfinite(want)) {
      EXPECT_THROW(spearman(x, y), StatError);
      continue;
    }
    EXPECT_NEAR(spearman(x, y), want, 1e-12);
  }
}

TEST(Spearman, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(rng, 40, trial % 2 ? 10 : 0);
    const auto y = random_vector(rng, 40, 0);
    std::vector<double> tx, ty;
    for (double v : x) tx.push_back(std::exp(3 * v) + 7);
    for (double v : y) ty.push_back(std::cbrt(v) - 2);
    EXPECT_EQ(spearman(x, y), spearman(tx, ty));
  }
}

TEST(Spearman, UndefinedCases) {
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{2, 1}), StatError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}), StatError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(RankCells, DescendingWithTiesAndMeans) {
  const auto g = grid_with_counts({5, 3, 1, 5});
  std::map<CellIndex, CellMeans> means;
  means[{0, 0}] = {10, 1, 1, 5};
  means[{0, 1}] = {20, 2, 2, 3};
  means[{0, 2}] = {30, 3, 3, 1};
  means[{0, 3}] = {10, 1, 1, 5};
  const auto r = rank_cells(g, means);
  ASSERT_EQ(r.cells.size(), 4u);
  // Cells in one row at one latitude have equal areas, so density order = count order.
  EXPECT_EQ(r.cells[0].rank, 1.5);
  EXPECT_EQ(r.cells[1].rank, 1.5);
  EXPECT_EQ(r.cells[2].rank, 3.0);
  EXPECT_EQ(r.cells[3].rank, 4.0);
  EXPECT_EQ(r.cells[3].rank_A, 1.0);
  EXPECT_NEAR(r.correlation(CellMetric::activity), -1.0, 1e-15);
}

TEST(RankCells, MatchSortOracleOnRandomGrid) {
  std::mt19937_64 rng(5);
  GridDensity g;
  g.spec = kGrid;
  std::map<CellIndex, CellMeans> means;
  for (int k = 0; k < 500; ++k) {
    const CellIndex c{static_cast<int>(rng() % 100), static_cast<int>(rng() % 160)};
    g.counts[c] = 1 + static_cast<std::uint32_t>(rng() % 30);
    means[c] = {double(rng() % 100), double(rng() % 1000) / 7, 1.0, 1};
  }
  const auto r = rank_cells(g, means);
  std::vector<double> dens, a;
  for (const auto& c : r.cells) {
    dens.push_back(c.density);
    a.push_back(c.means.A);
  }
  const auto rd = oracle::descending_ranks(dens), ra = oracle::descending_ranks(a);
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    EXPECT_EQ(r.cells[k].rank, rd[k]);
    EXPECT_EQ(r.cells[k].rank_A, ra[k]);
    if (k) EXPECT_LE(r.cells[k - 1].rank, r.cells[k].rank);
  }
  EXPECT_NEAR(r.correlation(CellMetric::activity), oracle::pearson(rd, ra), 1e-12);
}

namespace {

// Ranked cells whose metric is a given function of the density rank.
RankedCells planted_cells(std::size_t n, const std::function<double(double)>& metric_of_rank) {
  RankedCells r;
  r.spec = kGrid;
  for (std::size_t k = 0; k < n; ++k) {
    RankedCell c;
    c.cell = {0, static_cast<int>(k)};
    c.rank = static_cast<double>(k + 1);
    c.density = 1e6 / c.rank;
    c.means.A = metric_of_rank(c.rank);
    r.cells.push_back(c);
  }
  return r;
}

}  // namespace

TEST(SlidingCorrelation, PositiveEverywhereWhenActivityRisesWithDensity) {
  const auto r = planted_cells(3000, [](double rank) { return 1.0 / rank; });
  const auto bands = sliding_correlation(r, CellMetric::activity);
  std::size_t scored = 0;
  for (const auto& b : bands)
    if (b.rho) {
      EXPECT_GT(*b.rho, 0.0) << b.lo;
      ++scored;
    }
  EXPECT_GT(scored, 10u);
}

TEST(SlidingCorrelation, BandsSpanFactorTwoWithHalfOverlap) {
  const auto r = planted_cells(100, [](double rank) { return rank; });
  const auto bands = sliding_correlation(r, CellMetric::activity);
  ASSERT_GE(bands.size(), 3u);
  for (std::size_t k = 0; k < bands.size(); ++k) {
    EXPECT_DOUBLE_EQ(bands[k].hi, 2 * bands[k].lo);
    if (k) EXPECT_NEAR(bands[k].lo / bands[k - 1].lo, std::sqrt(2.0), 1e-12);
  }
  EXPECT_FALSE(bands[0].rho);  // [1, 2) holds one cell
  EXPECT_EQ(bands[0].note, "too few cells");
}

TEST(SlidingCorrelation, SignFlipDetectedNearPlantedRank) {
  // Denser than rank 100: metric falls with density; sparser: rises.
  const auto r = planted_cells(5000, [](double rank) { return rank <= 100 ? rank : 1e6 / rank; });
  const auto bands = sliding_correlation(r, CellMetric::activity);
  const auto at = sign_change_rank(bands);
  ASSERT_TRUE(at);
  EXPECT_GT(*at, 50.0);
  EXPECT_LT(*at, 200.0);
}

TEST(SlidingCorrelation, ConstantMetricReportsZeroVariance) {
  const auto r = planted_cells(200, [](double) { return 4.0; });
  const auto bands = sliding_correlation(r, CellMetric::activity);
  bool any = false;
  for (const auto& b : bands)
    if (b.cells >= 3) {
      EXPECT_FALSE(b.rho);
      EXPECT_NE(b.note.find("zero variance"), std::string::npos);
      any = true;
    }
  EXPECT_TRUE(any);
  EXPECT_FALSE(sign_change_rank(bands));
}

TEST(RankSize, TwoCellsNoFit) {
  const auto rs = rank_size(grid_with_counts({4, 9}));
  ASSERT_EQ(rs.densities.size(), 2u);
  EXPECT_GT(rs.densities[0], rs.densities[1]);
  EXPECT_FALSE(rs.fit);
}

TEST(RankSize, MonotoneAndMatchesOlsOracle) {
  std::mt19937_64 rng(6);
  std::vector<std::uint32_t> counts;
  for (int k = 0; k < 700; ++k) counts.push_back(1 + static_cast<std::uint32_t>(rng() % 1000));
  const auto g = grid_with_counts(counts);
  const auto rs = rank_size(g);
  for (std::size_t k = 1; k < rs.densities.size(); ++k) EXPECT_LE(rs.densities[k], rs.densities[k - 1]);
  ASSERT_TRUE(rs.fit);
  EXPECT_EQ(rs.fit->rank_min, 101u);
  EXPECT_NEAR(rs.fit->exponent, oracle::tail_exponent(rs.densities, 100), 1e-9);
}

TEST(RankSize, ExactPowerLawRecovered) {
  std::vector<std::uint32_t> counts;
  for (int r = 1; r <= 1000; ++r) counts.push_back(static_cast<std::uint32_t>(std::lround(1e7 / r)));
  const auto rs = rank_size(grid_with_counts(counts));
  ASSERT_TRUE(rs.fit);
  EXPECT_NEAR(rs.fit->exponent, 1.0, 1e-3);
  EXPECT_GT(rs.fit->r2, 0.999);
}

TEST(RankSize, PlantedZipfGrid) {
  const auto g = planted_zipf_grid(10000, 1.0, 10'000'000, 1);
  const auto rs = rank_size(g);
  ASSERT_TRUE(rs.fit);
  EXPECT_NEAR(rs.fit->exponent, 1.0, 0.05);
}

TEST(Areas, DefaultBoundsAndMonotone) {
  const AreaBounds b;
  EXPECT_EQ(b.area_of(1), 0);
  EXPECT_EQ(b.area_of(30), 0);
  EXPECT_EQ(b.area_of(30.5), 1);
  EXPECT_EQ(b.area_of(100), 1);
  EXPECT_EQ(b.area_of(101), 2);
  EXPECT_EQ(b.area_of(1000), 2);
  EXPECT_EQ(b.area_of(10000), 3);
  EXPECT_EQ(b.area_of(10001), 4);
  int previous = 0;
  for (double r = 1; r < 30000; r += 0.5) {
    EXPECT_GE(b.area_of(r), previous);
    previous = b.area_of(r);
  }
}

TEST(Areas, ClassifyRankedCells) {
  const auto r = planted_cells(200, [](double rank) { return rank; });
  const auto m = classify_areas(r, AreaBounds{});
  EXPECT_EQ(m.labels.at(r.cells[0].cell), 0);
  EXPECT_EQ(m.labels.at(r.cells[99].cell), 1);
  EXPECT_EQ(m.labels.at(r.cells[100].cell), 2);
  EXPECT_EQ(area_name(0), "Area1");
}

TEST(Areas, BoundsParsing) {
  EXPECT_EQ(AreaBounds::parse("10,20,30,40").upper, (std::array<double, 4>{10, 20, 30, 40}));
  EXPECT_THROW(AreaBounds::parse("10,20,20,40"), std::invalid_argument);
  EXPECT_THROW(AreaBounds::parse("10,20,30"), std::invalid_argument);
  EXPECT_THROW(AreaBounds::parse("10,x,30,40"), std::invalid_argument);
}

TEST(Areas, TableCarriesReferenceDensities) {
  const std::vector<LatLon> homes{{36.01, 20.01}, {36.02, 20.02}, {36.01, 20.06}};
  const auto g = build_density(homes, kGrid);
  const auto r = rank_cells(g);
  const auto m = classify_areas(r, AreaBounds{});
  const auto t = area_table(r, m, homes);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t[0].egos, 3u);
  EXPECT_EQ(t[0].cells, 2u);
  EXPECT_EQ(t[0].reference_density, 1252.9);
  EXPECT_EQ(t[1].reference_density, 418.7);
  EXPECT_EQ(t[4].reference_density, 1.5);
  EXPECT_GT(t[0].mean_fine_density, t[0].mean_density);
}
