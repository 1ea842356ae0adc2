#pragma once

#include "perpart/energy.hpp"
#include "perpart/error.hpp"
#include "perpart/grid_partition.hpp"
#include "perpart/optimizer.hpp"
#include "perpart/poly_partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace perpart {

// ---------------------------------------------------------------------------
// Junctions.

struct JunctionAngles {
  int vertex = 0;
  std::array<double, 3> angles{};  // degrees, counter-clockwise, summing to 360
  double max_dev = 0.0;
};

struct JunctionReport {
  std::vector<JunctionAngles> triple;
  std::vector<int> irregular;  // vertices of degree != 3
  double max_dev = 0.0;        // over triple junctions
};

/// Unit tangent of the fitted arc (or line) at one end of an edge, pointing
/// into the edge.
inline Vec2 fitted_tangent(const PolyPartition& p, const EdgeEnd& end) {
  const Polyline pl = edge_polyline(p, end.edge);
  const std::size_t n = pl.pts.size();
  const Vec2 at = end.at_tail ? pl.pts.front() : pl.pts.back();
  const Vec2 next = end.at_tail ? pl.pts[1] : pl.pts[n - 2];
  const Vec2 far = end.at_tail ? pl.pts.back() : pl.pts.front();
  if ((far - at).norm() == 0.0) return end_tangent(p, end);  // closed loop
  const ArcFit f = fit_circle(pl.pts);
  if (f.line) return (far - at).normalized();
  const Vec2 r = at - f.center;
  Vec2 t(-r.y(), r.x());
  t.normalize();
  return t.dot(next - at) >= 0.0 ? t : Vec2(-t);
}

/// Pairwise angles between consecutive fitted tangents at every degree-3
/// vertex. Other degrees are listed, not measured.
inline JunctionReport check_junctions(const PolyPartition& p) {
  JunctionReport rep;
  for (const Junction& j : junction_list(p)) {
    if (j.ends.size() != 3) {
      rep.irregular.push_back(j.vertex);
      continue;
    }
    std::array<double, 3> a{};
    for (int k = 0; k < 3; ++k) {
      const Vec2 t = fitted_tangent(p, j.ends[k]);
      a[k] = std::atan2(t.y(), t.x());
    }
    std::sort(a.begin(), a.end());
    JunctionAngles ja{j.vertex};
    for (int k = 0; k < 3; ++k) {
      const double d = (k < 2 ? a[k + 1] : a[0] + 2.0 * std::numbers::pi) - a[k];
      ja.angles[k] = deg(d);
      ja.max_dev = std::max(ja.max_dev, std::abs(ja.angles[k] - 120.0));
    }
    rep.max_dev = std::max(rep.max_dev, ja.max_dev);
    rep.triple.push_back(ja);
  }
  const auto inc = vertex_incidence(p);
  for (std::size_t v = 0; v < inc.size(); ++v)
    if (inc[v].size() < 3) rep.irregular.push_back(static_cast<int>(v));
  std::sort(rep.irregular.begin(), rep.irregular.end());
  return rep;
}

// ---------------------------------------------------------------------------
// Arcs and curvature sums.

/// Circle or line fit per edge; curvature sign as in edge_arcs. Every edge
/// polyline needs at least four points.
inline std::vector<EdgeArc> fit_arcs(const PolyPartition& p) {
  for (std::size_t e = 0; e < p.edges.size(); ++e)
    require(p.edges[e].samples.size() >= 2, "fit_arcs: edge " + std::to_string(e) + " has fewer than 4 points");
  return edge_arcs(p);
}

struct CurvatureSum {
  int vertex = 0;
  double sum = 0.0;  // signed sum with every arc oriented away from the vertex
};

/// Each incident arc is oriented away from the junction and counted positive
/// when its center is on the left. With per-cell pressures the sum then
/// telescopes to zero.
inline std::vector<CurvatureSum> check_curvature_sums(const PolyPartition& p, const std::vector<EdgeArc>& arcs) {
  std::vector<CurvatureSum> out;
  for (const Junction& j : junction_list(p)) {
    require(j.ends.size() == 3, "check_curvature_sums: vertex " + std::to_string(j.vertex) + " has degree " +
                                    std::to_string(j.ends.size()));
    CurvatureSum c{j.vertex};
    for (const EdgeEnd& end : j.ends) c.sum += end.at_tail ? arcs[end.edge].kappa : -arcs[end.edge].kappa;
    out.push_back(c);
  }
  return out;
}

inline std::vector<CurvatureSum> check_curvature_sums(const PolyPartition& p) {
  return check_curvature_sums(p, fit_arcs(p));
}

// ---------------------------------------------------------------------------
// Minimality probe.

struct ProbeOptions {
  int trials = 100;
  std::uint64_t seed = 1;
  bool topology = true;  // also try splitting junctions of degree >= 4 inside the ball
};

struct ProbeResult {
  int trials = 0;
  int evaluated = 0;  // trials whose competitor was admissible
  double worst = 0.0;  // min of E(F) - E(E) + Lambda |E delta F|
  bool vacuous = true;
  bool passed(double tol = 1e-9) const { return vacuous || worst >= -tol; }
};

/// Random competitors supported in balls of radius < rho_G/2: a smooth
/// random displacement of the points inside the ball (optionally after a
/// junction split there), then the original areas restored by moving only
/// those points.
inline ProbeResult minimality_probe(const PolyPartition& p, const EnergyModel& model, const ProbeOptions& opt = {}) {
  require(opt.trials >= 0, "minimality_probe: trials must be >= 0");
  ProbeResult res;
  res.trials = opt.trials;
  if (opt.trials == 0) return res;
  const double rho = packing_radius(p.lattice);
  const double e0 = evaluate(p, model).total;
  const std::vector<double> areas = cell_areas(p);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::VectorXd x0 = p.positions();
  res.worst = std::numeric_limits<double>::infinity();

  for (int t = 0; t < opt.trials; ++t) {
    const double r = 0.5 * rho * (0.3 + 0.68 * unit(rng));
    const int anchor = std::min(p.dof_count() - 1, static_cast<int>(unit(rng) * p.dof_count()));
    const double off_r = 0.5 * r * unit(rng), off_a = 2.0 * std::numbers::pi * unit(rng);
    const Ball ball{x0.segment<2>(2 * anchor) + off_r * Vec2(std::cos(off_a), std::sin(off_a)), r};
    const double lambda = lambda_constant(model, p.lattice, r);

    PolyPartition q = p;
    const bool try_split = opt.topology && unit(rng) < 0.5;
    if (try_split) {
      const auto inc = detail::vertex_ends_sorted(p);
      for (std::size_t v = 0; v < inc.size(); ++v) {
        if (inc[v].size() < 4) continue;
        const Vec2 y = nearest_translate(p.lattice, p.vertices[v], ball.center);
        if ((y - ball.center).norm() >= 0.5 * r) continue;
        const std::size_t k = std::min(inc[v].size() - 1, static_cast<std::size_t>(unit(rng) * inc[v].size()));
        const double len = r * (0.05 + 0.4 * unit(rng));
        q = detail::split_vertex(p, static_cast<int>(v), {inc[v][k], inc[v][(k + 1) % inc[v].size()]}, len,
                                 detail::max_samples(p));
        break;
      }
    }

    const double amp = r * std::pow(10.0, -3.0 + 2.0 * unit(rng));
    const Vec2 u(gauss(rng), gauss(rng));
    Eigen::Matrix2d a;
    a << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
    const std::vector<bool> in = dofs_in_ball(q, ball);
    Eigen::VectorXd x = q.positions();
    for (int k = 0; k < q.dof_count(); ++k) {
      const Vec2 noise(gauss(rng), gauss(rng));
      if (!in[k]) continue;
      const Vec2 y = nearest_translate(q.lattice, x.segment<2>(2 * k), ball.center);
      const double s = 1.0 - (y - ball.center).squaredNorm() / (r * r);
      x.segment<2>(2 * k) += amp * s * s * (u + a * (y - ball.center) / r + 0.1 * noise);
    }
    q.set_positions(x);
    try {
      restore_areas(q, areas, in);
    } catch (const Error&) {
      continue;
    }
    if (!detail::cells_simple(q)) continue;
    double value = evaluate(q, model).total - e0;
    if (lambda > 0.0) value += lambda * symmetric_difference_area(p, q);
    res.worst = std::min(res.worst, value);
    ++res.evaluated;
  }
  res.vacuous = res.evaluated == 0;
  if (res.vacuous) res.worst = 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Diameter bounds.

struct DiameterReport {
  std::vector<ComponentDiameter> cells;  // per cell (polygonal) or per component (grid)
  double domain_diameter = 0.0;
  double covering_radius = 0.0;
  double domain_excess = 0.0;  // measured C in diam(D) <= 2 r_G + C
  double max_ratio = 0.0;      // max diameter / perimeter
};

inline DiameterReport diameter_bound_check(const PolyPartition& p) {
  DiameterReport rep;
  std::vector<Vec2> all;
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    if (p.cells[ci].loop.empty()) continue;
    const Polygon poly = cell_polygon(p, ci);
    ComponentDiameter c{p.cells[ci].label};
    c.diameter = diameter(poly);
    c.perimeter = perimeter(poly);
    c.ratio = c.diameter / c.perimeter;
    c.flagged = c.ratio > 0.5;
    rep.max_ratio = std::max(rep.max_ratio, c.ratio);
    rep.cells.push_back(c);
    all.insert(all.end(), poly.begin(), poly.end());
  }
  rep.domain_diameter = hull_diameter(all);
  rep.covering_radius = covering_radius(p.lattice);
  rep.domain_excess = rep.domain_diameter - 2.0 * rep.covering_radius;
  return rep;
}

inline DiameterReport diameter_bound_check(const GridPartition& g) {
  validate(g);
  DiameterReport rep;
  for (int l = 1; l <= g.num_labels; ++l)
    for (const ComponentDiameter& c : diameter_check(g, l)) {
      rep.max_ratio = std::max(rep.max_ratio, c.ratio);
      rep.cells.push_back(c);
    }
  rep.domain_diameter = cell_diameter(g.lattice);
  rep.covering_radius = covering_radius(g.lattice);
  rep.domain_excess = rep.domain_diameter - 2.0 * rep.covering_radius;
  return rep;
}

// ---------------------------------------------------------------------------
// Hausdorff distance between two states with the same labels.

/// Max over labels of the Hausdorff distance on the torus between the cell
/// boundary polylines (sample points only).
inline double boundary_hausdorff(const PolyPartition& a, const PolyPartition& b) {
  require(a.num_cells() == b.num_cells(), "hausdorff: cell count mismatch");
  auto one_sided = [&](const Polygon& x, const Polygon& y) {
    double h = 0.0;
    for (const Vec2& s : x) {
      double d = INFINITY;
      for (const Vec2& t : y) d = std::min(d, torus_distance(a.lattice, s, t));
      h = std::max(h, d);
    }
    return h;
  };
  double h = 0.0;
  for (int ci = 0; ci < a.num_cells(); ++ci) {
    const Polygon pa = cell_polygon(a, ci), pb = cell_polygon(b, b.cell_index(a.cells[ci].label));
    h = std::max({h, one_sided(pa, pb), one_sided(pb, pa)});
  }
  return h;
}

// ---------------------------------------------------------------------------
// Full report.

struct DiagnosticsReport {
  JunctionReport junctions;
  std::vector<EdgeArc> arcs;
  double arc_rms_max = 0.0;
  std::optional<double> curvature_sum_max;  // absent when some vertex has degree != 3
  std::optional<double> pressure_residual;  // absent when the pressure system is under-determined
  std::vector<double> pressures;
  DiameterReport diameters;
  std::optional<double> hausdorff_to_reference;
  ProbeResult probe;
};

inline DiagnosticsReport diagnose(const PolyPartition& p, const EnergyModel& model, const ProbeOptions& probe = {},
                                  const PolyPartition* reference = nullptr) {
  validate(p);
  DiagnosticsReport rep;
  rep.junctions = check_junctions(p);
  rep.arcs = fit_arcs(p);
  for (const EdgeArc& a : rep.arcs) rep.arc_rms_max = std::max(rep.arc_rms_max, a.rms);
  if (rep.junctions.irregular.empty()) {
    double m = 0.0;
    for (const CurvatureSum& c : check_curvature_sums(p, rep.arcs)) m = std::max(m, std::abs(c.sum));
    rep.curvature_sum_max = m;
  }
  try {
    const PressureVector pv = fit_pressures(p, rep.arcs);
    rep.pressures = pv.rho;
    rep.pressure_residual = pv.residual;
  } catch (const Error&) {
  }
  rep.diameters = diameter_bound_check(p);
  if (reference) rep.hausdorff_to_reference = boundary_hausdorff(p, *reference);
  rep.probe = minimality_probe(p, model, probe);
  return rep;
}

}  // namespace perpart
