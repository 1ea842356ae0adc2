#include "perpart/constructions.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace perpart;

namespace {

const double kPerH = 2 * std::pow(12.0, 0.25);

double energy(const PolyPartition& p) { return total_energy(p, EnergyModel::classical(p.targets())).total; }

// Random admissible volume vector with entries in (lo, hi) summing to n.
std::vector<double> random_volumes(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  while (true) {
    std::vector<double> v(n);
    double s = 0;
    for (int i = 0; i + 1 < n; ++i) s += v[i] = u(rng);
    v[n - 1] = n - s;
    if (v[n - 1] > lo && v[n - 1] < hi) return v;
  }
}

}  // namespace

TEST(Constructions, HexParamsAffine) {
  const HexParams hp;
  EXPECT_NEAR(hp.volume_of_x(0), 1.0, 1e-15);
  EXPECT_NEAR(hp.l, std::sqrt(2 / (3 * std::sqrt(3.0))), 1e-15);
  double prev = 0;
  for (int k = -4; k <= 4; ++k) {
    const double x = 0.1 * k * hp.l;
    // shoelace oracle
    const double l = hp.l, h = hp.h;
    const Polygon p{{0, 0}, {l / 2, -h}, {1.5 * l + x, -h}, {2 * l + x, 0}, {1.5 * l + x, h}, {l / 2, h}};
    EXPECT_NEAR(signed_area(p), hp.volume_of_x(x), 1e-14);
    EXPECT_NEAR(perimeter(p), kPerH + 2 * x, 1e-14);
    if (k > -4) {
      EXPECT_GT(signed_area(p), prev);
    }
    prev = signed_area(p);
  }
}

TEST(Constructions, HoneycombExamples) {
  EXPECT_NEAR(energy(honeycomb(1)), 0.5 * kPerH, 1e-12);
  EXPECT_NEAR(energy(honeycomb(1)), 1.86121, 1e-5);
  EXPECT_NEAR(energy(honeycomb(4)), 2 * kPerH, 1e-12);
  for (int n : {1, 2, 5}) {
    const PolyPartition p = honeycomb(n);
    EXPECT_NO_THROW(validate(p));
    EXPECT_NEAR(volume(p.lattice), n, 1e-12);
    for (double a : cell_areas(p)) EXPECT_NEAR(a, 1.0, 1e-12);
  }
  EXPECT_THROW(honeycomb(0), Error);
}

TEST(Constructions, StretchedHexExamples) {
  const PolyPartition a = stretched_hex_domain({1, 1, 1});
  const PolyPartition b = honeycomb(3);
  EXPECT_EQ(a.positions(), b.positions());
  const PolyPartition p = stretched_hex_domain({1.2, 0.8});
  EXPECT_NEAR(energy(p), kPerH, 1e-12);
  EXPECT_NEAR(cell_area(p, 1), 1.2, 1e-10);
  EXPECT_NEAR(cell_area(p, 2), 0.8, 1e-10);
  const HexParams hp;
  EXPECT_NEAR(hp.x_of_volume(1.2) + hp.x_of_volume(1.0) + hp.x_of_volume(0.8), 0.0, 1e-12);
  EXPECT_THROW(stretched_hex_domain({1.6, 0.4}), Error);
  EXPECT_THROW(stretched_hex_domain({1.2, 0.7}), Error);
}

TEST(Constructions, StretchedHexEnergyIdentityRandom) {
  std::mt19937_64 rng(42);
  const HexParams hp;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 5;
    const auto v = random_volumes(rng, n, 0.6, 1.4);
    const PolyPartition p = stretched_hex_domain(v);
    EXPECT_NEAR(energy(p), 0.5 * n * kPerH, 1e-10);
    const auto a = cell_areas(p);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(a[i], v[i], 1e-10);
      // perimeter increment is twice the stretch recovered from the area
      EXPECT_NEAR(cell_perimeter_at(p, i, Anisotropy::euclidean()) - kPerH, 2 * hp.x_of_volume(a[i]), 1e-10);
    }
    for (const auto& j : junction_list(p)) EXPECT_EQ(j.ends.size(), 3u);
  }
}

TEST(Constructions, WulffTilingExamples) {
  const Anisotropy a = Anisotropy::ell1();
  for (int n : {1, 2, 3, 4, 6}) {
    const PolyPartition p = wulff_tiling(a, std::vector<double>(n, 1.0));
    EXPECT_NO_THROW(validate(p));
    EXPECT_NEAR(total_energy(p, EnergyModel::anisotropic(a, p.targets())).total, 2.0 * n, 1e-12);
  }
  const PolyPartition four = wulff_tiling(a, {1, 1, 1, 1});
  EXPECT_NEAR(four.lattice.e(0).norm(), 2.0, 1e-15);
  EXPECT_NEAR(four.lattice.e(1).norm(), 2.0, 1e-15);
  const PolyPartition big = wulff_tiling(a, {4});
  EXPECT_NEAR(total_energy(big, EnergyModel::anisotropic(a, {4})).total, 4.0, 1e-12);
  EXPECT_THROW(wulff_tiling(a, {1, 1, 2}), Error);
  EXPECT_THROW(wulff_tiling(Anisotropy::euclidean(), {1}), Error);
  // mixed rows: one 2x2 square above four unit squares; T-junctions inserted
  const PolyPartition mixed = wulff_tiling(a, {4, 1, 1, 1, 1});
  EXPECT_NO_THROW(validate(mixed));
  EXPECT_NEAR(total_energy(mixed, EnergyModel::anisotropic(a, mixed.targets())).total, 0.5 * (8 + 4 * 4), 1e-12);
}

TEST(Constructions, SlabExamples) {
  const PolyPartition p = slab_partition(Lattice::square(), {0.5, 0.5});
  EXPECT_NEAR(energy(p), 3.0, 1e-12);
  const Lattice hex = Lattice::hexagonal(2.0);
  const PolyPartition whole = slab_partition(hex, {2.0});
  EXPECT_NEAR(energy(whole), 0.5 * fundamental_parallelepiped(hex).perimeter(), 1e-12);
  EXPECT_THROW(slab_partition(Lattice::square(), {0.5, 0.4}), Error);
}

TEST(Constructions, SlabBoundRandom) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2), mu(0, 2), w(0.2, 1);
  int done = 0;
  while (done < 20) {
    const Lattice lat = Lattice::planar({u(rng), u(rng)}, {u(rng), u(rng)});
    const double vol = volume(lat);
    if (vol < 0.2) continue;
    const int n = 1 + done % 5;
    std::vector<double> v(n);
    double s = 0;
    for (double& x : v) s += x = w(rng);
    for (double& x : v) x *= vol / s;
    const PolyPartition p = slab_partition(lat, v);
    ASSERT_NO_THROW(validate(p));
    const auto a = cell_areas(p);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(a[i], v[i], 1e-12 * (1 + vol));
    EnergyModel m = EnergyModel::classical(v);
    m.mu = mu(rng);
    const double bound = (m.mu + n / 2.0) * fundamental_parallelepiped(lat).perimeter();
    EXPECT_LE(total_energy(p, m).total, bound * (1 + 1e-12));
    ++done;
  }
}

TEST(Constructions, TwoBlockCompetitor) {
  EXPECT_NEAR(twoblock_leading_term(4, 0.3), (std::sqrt(0.7) + std::sqrt(1.3)) * kPerH * 4, 1e-12);
  EXPECT_NEAR(twoblock_leading_term(4, 0.3), 29.434, 1e-3);
  EXPECT_LT(twoblock_leading_term(4, 0.3), 8 * kPerH);
  EXPECT_NEAR(twoblock_leading_term(6, 0.0), kPerH * 36 / 2, 1e-12);
  for (double d : {0.0, 0.1, 0.3, 0.45}) {
    const TwoBlock tb = twoblock_competitor(4, d);
    EXPECT_NO_THROW(validate(tb.partition));
    EXPECT_EQ(tb.partition.num_cells(), 16);
    const auto a = cell_areas(tb.partition);
    for (int i = 0; i < 16; ++i) EXPECT_NEAR(a[i], tb.partition.cells[i].target, 1e-12);
    EXPECT_NEAR(tb.energy, energy(tb.partition), 1e-12);
    EXPECT_GE(tb.energy, tb.leading);
    EXPECT_GE(tb.c, 0.0);
    EXPECT_LE(tb.energy, tb.bound + 1e-12);
  }
  const TwoBlock fixed = twoblock_competitor(4, 0.2, 5.0);
  EXPECT_NEAR(fixed.bound, fixed.leading + 20.0, 1e-12);
  EXPECT_THROW(twoblock_competitor(3, 0.2), Error);
  EXPECT_THROW(twoblock_competitor(4, 0.5), Error);
}

TEST(Constructions, PerturbExamples) {
  const PolyPartition p = honeycomb(4);
  EXPECT_EQ(perturb(p, 0.0, 1).positions(), p.positions());
  EXPECT_EQ(perturb(p, 0.05, 3).positions(), perturb(p, 0.05, 3).positions());
  EXPECT_NE(perturb(p, 0.05, 3).positions(), perturb(p, 0.05, 4).positions());
  for (int seed = 0; seed < 10; ++seed) {
    const PolyPartition q = perturb(p, 0.05, seed);
    EXPECT_NO_THROW(validate(q));
    EXPECT_GT(energy(q), 2 * kPerH);
  }
  EXPECT_THROW(perturb(p, -1.0, 1), Error);
}

TEST(Constructions, VoronoiPartition) {
  const Lattice lat = stretched_hex_domain({1, 1}).lattice;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<Vec2> sites;
    for (int k = 0; k < 2 + t % 4; ++k) sites.push_back(lat.point(Vec2i(0, 0)) + lat.e(0) * u(rng) + lat.e(1) * u(rng));
    const int n = static_cast<int>(sites.size());
    const double vol = volume(lat);
    const PolyPartition p = voronoi_partition(lat, sites, std::vector<double>(n, vol / n));
    ASSERT_NO_THROW(validate(p));
    for (int ci = 0; ci < n; ++ci) EXPECT_TRUE(point_in_polygon(sites[ci], cell_polygon(p, ci)));
  }
  // hexagonal lattice with one site: the Voronoi cell is the regular hexagon
  const PolyPartition one = voronoi_partition(Lattice::hexagonal(), {Vec2(0.1, 0.2)}, {1.0});
  EXPECT_NEAR(energy(one), 0.5 * kPerH, 1e-9);
}

TEST(Constructions, JunctionCandidates) {
  for (const std::vector<double>& v : {std::vector<double>{1.0, 0.02}, std::vector<double>{1.0, 0.02, 0.03}}) {
    const PolyPartition p = junction_candidate(v);
    ASSERT_NO_THROW(validate(p));
    const auto a = cell_areas(p);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(a[i], v[i], 1e-12);
    for (const auto& j : junction_list(p)) EXPECT_EQ(j.ends.size(), 3u);
  }
  EXPECT_THROW(junction_candidate({1.0}), Error);
}
