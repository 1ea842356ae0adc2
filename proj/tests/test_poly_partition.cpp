#include "perpart/constructions.hpp"
#include "perpart/poly_partition.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace perpart;

namespace {

const double kPerH = 2 * std::pow(12.0, 0.25);

// Single unit square on Z^2 with one vertex of degree 4.
PolyPartition unit_square_torus() {
  return build_from_corners(Lattice::square(), {Vec2(0, 0)},
                            {{{0, Vec2i(0, 0)}, {0, Vec2i(1, 0)}, {0, Vec2i(1, 1)}, {0, Vec2i(0, 1)}}},
                            {1.0}, 4);
}

PolyPartition scaled(const PolyPartition& p, double t) {
  PolyPartition q = p;
  q.lattice = Lattice(p.lattice.basis() * t);
  q.set_positions(p.positions() * t);
  for (Cell& c : q.cells) c.target *= t * t;
  return q;
}

std::vector<PolyPartition> sample_states() {
  return {honeycomb(1), honeycomb(3), stretched_hex_domain({1.2, 0.8}),
          perturb(honeycomb(4), 0.05, 9), wulff_tiling(Anisotropy::ell1(), {1, 1, 1, 1}),
          twoblock_competitor(4, 0.3).partition};
}

}  // namespace

TEST(PolyPartition, UnitSquareCell) {
  const PolyPartition p = unit_square_torus();
  EXPECT_NO_THROW(validate(p));
  EXPECT_NEAR(cell_area(p, 1), 1.0, 1e-15);
  EXPECT_NEAR(cell_perimeter(p, 1, Anisotropy::euclidean()), 4.0, 1e-14);
  EXPECT_NEAR(cell_perimeter(p, 1, Anisotropy::ell1()), 4.0, 1e-14);
  const auto b = total_energy(p, EnergyModel::anisotropic(Anisotropy::ell1(), {1.0}));
  EXPECT_NEAR(b.total, 2.0, 1e-14);
  EXPECT_EQ(p.edges.size(), 2u);
}

TEST(PolyPartition, RegularHexagonCell) {
  // independent oracle: hexagon with circumradius l centred at the origin
  const double l = std::sqrt(2.0 / (3.0 * std::sqrt(3.0)));
  Polygon hex;
  for (int k = 0; k < 6; ++k) hex.emplace_back(l * std::cos(k * std::numbers::pi / 3), l * std::sin(k * std::numbers::pi / 3));
  EXPECT_NEAR(signed_area(hex), 1.0, 1e-14);

  const PolyPartition p = honeycomb(1);
  EXPECT_NEAR(cell_area(p, 1), signed_area(hex), 1e-12);
  EXPECT_NEAR(cell_perimeter(p, 1, Anisotropy::euclidean()), perimeter(hex), 1e-12);
  EXPECT_NEAR(cell_perimeter(p, 1, Anisotropy::euclidean()), 3.72242, 1e-5);
}

TEST(PolyPartition, StretchedHexagonArea) {
  // oracle: find the stretch x by bisection on the shoelace area of an explicitly built polygon
  const double l = std::sqrt(2.0 / (3.0 * std::sqrt(3.0))), h = std::sqrt(3.0) * l / 2;
  auto poly = [&](double x) {
    return Polygon{{0, 0}, {l / 2, -h}, {1.5 * l + x, -h}, {2 * l + x, 0}, {1.5 * l + x, h}, {l / 2, h}};
  };
  double lo = -l, hi = l;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (signed_area(poly(mid)) < 1.2 ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  const PolyPartition p = stretched_hex_domain({1.2, 0.8});
  EXPECT_NEAR(cell_area(p, 1), 1.2, 1e-12);
  EXPECT_NEAR(cell_perimeter(p, 1, Anisotropy::euclidean()), perimeter(poly(x)), 1e-12);
  EXPECT_NEAR(HexParams{}.x_of_volume(1.2), x, 1e-12);
}

TEST(PolyPartition, HoneycombEnergy) {
  const PolyPartition p = honeycomb(4);
  EXPECT_NO_THROW(validate(p));
  const EnergyModel m = EnergyModel::classical({1, 1, 1, 1});
  const auto b = total_energy(p, m);
  EXPECT_NEAR(b.total, 2 * kPerH, 1e-12);
  EXPECT_NEAR(b.total, 7.44484, 1e-5);
  EXPECT_NEAR(b.total, b.mu_term + b.half_sum_perimeters + b.penalty_term, 1e-12);
  EnergyModel pen = m;
  pen.penalized(10.0);
  EXPECT_NEAR(total_energy(p, pen).total, b.total, 1e-12);
  EXPECT_NEAR(total_energy(p, pen).penalty_term, 0.0, 1e-12);
}

TEST(PolyPartition, NonLocalRoutedElsewhere) {
  EXPECT_THROW(total_energy(honeycomb(2), EnergyModel::nonlocal(Kernel{}, {1, 1})), Error);
}

TEST(PolyPartition, DomainPerimeterTerm) {
  // slab halves of Z^2: the realization of D is the unit square
  const PolyPartition p = slab_partition(Lattice::square(), {0.5, 0.5});
  EXPECT_NEAR(domain_perimeter(p, Anisotropy::euclidean()), 4.0, 1e-12);
  EnergyModel m = EnergyModel::classical({0.5, 0.5});
  m.mu = 0.5;
  const auto b = total_energy(p, m);
  EXPECT_NEAR(b.mu_term, 2.0, 1e-12);
  EXPECT_NEAR(b.half_sum_perimeters, 3.0, 1e-12);
  // single hexagon: every edge lies on the boundary of the realization
  EXPECT_NEAR(domain_perimeter(honeycomb(1), Anisotropy::euclidean()), kPerH, 1e-12);
}

TEST(PolyPartition, Junctions) {
  for (const auto& j : junction_list(honeycomb(3))) {
    EXPECT_EQ(j.ends.size(), 3u);
    for (std::size_t a = 0; a < 3; ++a) {
      EXPECT_NEAR(j.tangents[a].norm(), 1.0, 1e-12);
      for (std::size_t b = a + 1; b < 3; ++b)
        EXPECT_NEAR(std::acos(std::clamp(j.tangents[a].dot(j.tangents[b]), -1.0, 1.0)), 2 * std::numbers::pi / 3, 1e-9);
    }
  }
  EXPECT_EQ(junction_list(honeycomb(3)).size(), 6u);
  const auto sq = junction_list(wulff_tiling(Anisotropy::ell1(), {1, 1, 1, 1}));
  ASSERT_FALSE(sq.empty());
  for (const auto& j : sq) EXPECT_EQ(j.ends.size(), 4u);
  // a lone cell without skeleton has no junctions
  PolyPartition whole{Lattice::square(), {}, {}, {Cell{1, {}, 1.0, Vec2i::Zero()}}};
  EXPECT_NO_THROW(validate(whole));
  EXPECT_TRUE(junction_list(whole).empty());
}

TEST(PolyPartition, ValidationCatchesCorruption) {
  PolyPartition p = honeycomb(2);
  PolyPartition bad = p;
  bad.cells[0].loop.pop_back();
  EXPECT_THROW(validate(bad), Error);
  bad = p;
  bad.cells[0].loop[0].forward = !bad.cells[0].loop[0].forward;
  EXPECT_THROW(validate(bad), Error);
  bad = p;
  bad.cells[1].target = 0.0;
  bad.cells[0].target = 2.0;
  EXPECT_THROW(validate(bad), Error);
  bad = p;
  bad.cells[1].label = 1;
  EXPECT_THROW(validate(bad), Error);
}

TEST(PolyPartition, TilingClosure) {
  for (const PolyPartition& p : sample_states()) {
    ASSERT_NO_THROW(validate(p));
    std::vector<Polygon> tiles;
    for (int ci = 0; ci < p.num_cells(); ++ci)
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
          Polygon poly = cell_polygon(p, ci);
          for (Vec2& x : poly) x += p.lattice.point(Vec2i(a, b));
          tiles.push_back(poly);
        }
    double worst = 0.0;
    for (std::size_t i = 0; i < tiles.size(); ++i)
      for (std::size_t j = i + 1; j < tiles.size(); ++j) worst = std::max(worst, intersection_area(tiles[i], tiles[j]));
    EXPECT_LT(worst, 1e-9);
  }
}

TEST(PolyPartition, TranslationAndShiftInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> k(-2, 2);
  for (const PolyPartition& p : sample_states()) {
    const EnergyModel m = EnergyModel::classical(p.targets());
    const double e0 = total_energy(p, m).total;
    // move one cell of the realization by a lattice vector
    PolyPartition q = p;
    q.cells[0].shift += Vec2i(k(rng), k(rng));
    EXPECT_NEAR(total_energy(q, m).total, e0, 1e-12 * (1 + e0));
    // rigid translation of all points
    PolyPartition t = p;
    Eigen::VectorXd x = t.positions();
    for (int i = 0; i < t.dof_count(); ++i) x.segment<2>(2 * i) += Vec2(0.3, -0.7);
    t.set_positions(x);
    EXPECT_NEAR(total_energy(t, m).total, e0, 1e-12 * (1 + e0));
  }
}

TEST(PolyPartition, HalfSumEqualsInterfaceLength) {
  for (const PolyPartition& p : sample_states()) {
    const auto b = total_energy(p, EnergyModel::classical(p.targets()));
    EXPECT_NEAR(b.half_sum_perimeters, interface_length(p, Anisotropy::euclidean()), 1e-12 * (1 + b.total));
  }
}

TEST(PolyPartition, Homogeneity) {
  for (const PolyPartition& p : sample_states()) {
    const double t = 1.7;
    const PolyPartition q = scaled(p, t);
    for (int ci = 0; ci < p.num_cells(); ++ci) {
      EXPECT_NEAR(cell_area_at(q, ci), t * t * cell_area_at(p, ci), 1e-12);
      EXPECT_NEAR(cell_perimeter_at(q, ci, Anisotropy::euclidean()), t * cell_perimeter_at(p, ci, Anisotropy::euclidean()), 1e-12);
    }
  }
}

TEST(PolyPartition, AreaJacobianMatchesFiniteDifferences) {
  const PolyPartition p = perturb(honeycomb(3), 0.05, 4);
  const Eigen::MatrixXd jac = area_jacobian(p);
  const Eigen::VectorXd x = p.positions();
  const double h = 1e-6;
  for (int k = 0; k < x.size(); k += 7) {
    PolyPartition a = p, b = p;
    Eigen::VectorXd xa = x, xb = x;
    xa(k) += h;
    xb(k) -= h;
    a.set_positions(xa);
    b.set_positions(xb);
    const auto pa = cell_areas(a), pb = cell_areas(b);
    for (int i = 0; i < p.num_cells(); ++i) EXPECT_NEAR(jac(i, k), (pa[i] - pb[i]) / (2 * h), 1e-7);
  }
}

TEST(LocalPerturbation, ZeroDisplacementIsIdentity) {
  const PolyPartition p = honeycomb(2);
  const Ball ball{p.vertices[0], 0.2};
  const PolyPartition q = local_perturbation(p, ball, std::vector<Vec2>(p.dof_count(), Vec2::Zero()), true);
  EXPECT_EQ(q.positions(), p.positions());
}

TEST(LocalPerturbation, RejectsLargeBallAndOutsideSupport) {
  const PolyPartition p = honeycomb(2);
  const double rho = packing_radius(p.lattice);
  std::vector<Vec2> d(p.dof_count(), Vec2::Zero());
  EXPECT_THROW(local_perturbation(p, {p.vertices[0], rho / 2}, d, false), Error);
  d[1] = Vec2(0.01, 0);  // vertex 1 is far from vertex 0
  EXPECT_THROW(local_perturbation(p, {p.vertices[0], 0.05}, d, false), Error);
}

TEST(LocalPerturbation, InwardBumpIncreasesPerimeter) {
  const PolyPartition p = honeycomb(2);
  const EnergyModel m = EnergyModel::classical({1, 1});
  const double e0 = total_energy(p, m).total;
  // bump the middle samples of edge 0 sideways
  const Polyline pl = edge_polyline(p, 0);
  const Vec2 mid = 0.5 * (pl.pts.front() + pl.pts.back());
  const Vec2 t = (pl.pts.back() - pl.pts.front()).normalized();
  const Ball ball{mid, 0.2};
  std::vector<Vec2> d(p.dof_count(), Vec2::Zero());
  for (std::size_t k = 1; k + 1 < pl.pts.size(); ++k) {
    const double r = (pl.pts[k] - mid).norm() / 0.15;
    if (r < 1) d[pl.dof[k]] = 0.01 * (1 - r * r) * Vec2(-t.y(), t.x());
  }
  const PolyPartition q = local_perturbation(p, ball, d, true);
  const auto a0 = cell_areas(p), a1 = cell_areas(q);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(a1[i], a0[i], 1e-10);
  EXPECT_GT(total_energy(q, m).total, e0);

  // without area restoration under a penalized model: the energy change is
  // at least -Lambda |E (sym diff) F|
  EnergyModel pen = m;
  pen.penalized(3.0);
  const PolyPartition r = local_perturbation(p, ball, d, false);
  const double lam = lambda_constant(pen, p.lattice, ball.radius);
  const double change = total_energy(r, pen).total - total_energy(p, pen).total;
  EXPECT_GE(change, -lam * symmetric_difference_area(p, r) - 1e-12);
  EXPECT_GT(symmetric_difference_area(p, r), 0.0);
}

TEST(Overlay, SymmetricDifferenceOfShiftedSquares) {
  const Polygon a{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Polygon b = a;
  for (Vec2& x : b) x += Vec2(0.25, 0);
  EXPECT_NEAR(intersection_area(a, b), 0.75, 1e-12);
  EXPECT_NEAR(symmetric_difference_area(a, b), 0.5, 1e-12);
}
