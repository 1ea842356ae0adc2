#pragma once

#include "perpart/arcs.hpp"
#include "perpart/error.hpp"
#include "perpart/grid_partition.hpp"
#include "perpart/model.hpp"
#include "perpart/poly_partition.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

namespace perpart {

using State = std::variant<PolyPartition, GridPartition>;

/// Smoothing width of the penalty kink used by the gradient.
inline constexpr double kPenaltySmoothing = 1e-7;

inline EnergyBreakdown evaluate(const PolyPartition& p, const EnergyModel& model) {
  require(model.is_local(), "evaluate: non-local perimeters need a grid state", ErrorKind::unsupported);
  return total_energy(p, model);
}

inline EnergyBreakdown evaluate(const GridPartition& g, const EnergyModel& model) {
  validate(g);
  require(static_cast<int>(model.volumes.size()) == g.num_labels, "energy model volume count != label count");
  EnergyBreakdown b;
  std::vector<double> per(g.num_labels, 0.0);
  if (model.is_local()) {
    for (int l = 1; l <= g.num_labels; ++l) per[l - 1] = grid_perimeter(g, l, model.norm());
    if (model.mu > 0.0)
      b.mu_term = model.mu * anisotropic_perimeter(model.norm(), fundamental_parallelepiped(g.lattice).polygon());
  } else {
    require(model.mu == 0.0, "evaluate: mu > 0 with a non-local perimeter is not implemented",
            ErrorKind::unsupported);
    model.kernel.validate();
    const PeriodizedKernel kp(g, model.kernel, truncation_radius(g, model.kernel));
    for (int l = 1; l <= g.num_labels; ++l) {
      std::vector<char> in(g.size());
      for (int q = 0; q < g.size(); ++q) in[q] = g.labels[q] == l;
      const int c = static_cast<int>(std::count(in.begin(), in.end(), 1));
      if (c > 0 && c < g.size()) per[l - 1] = nonlocal_sum(g, in, kp);
    }
  }
  double half = 0.0;
  for (int l = 1; l <= g.num_labels; ++l) {
    CellEnergy ce{g.label_volume(l), per[l - 1], 0.0};
    const double dev = std::abs(ce.area - model.volumes[l - 1]);
    if (model.mode == VolumeMode::penalized) ce.penalty = model.lambda * dev;
    b.volume_residual = std::max(b.volume_residual, dev);
    half += ce.perimeter;
    b.penalty_term += ce.penalty;
    b.per_cell.push_back(ce);
  }
  b.half_sum_perimeters = 0.5 * half;
  b.total = b.mu_term + b.half_sum_perimeters + b.penalty_term;
  return b;
}

inline EnergyBreakdown evaluate(const State& s, const EnergyModel& model) {
  return std::visit([&](const auto& x) { return evaluate(x, model); }, s);
}

// ---------------------------------------------------------------------------
// Gradients of polygonal states.

/// Add w * d(phi-length of the polyline)/d(points) into grad, routed through
/// the DOF ids.
inline void add_length_gradient(const Polyline& pl, const Anisotropy& a, double w, Eigen::VectorXd& grad) {
  for (std::size_t k = 0; k + 1 < pl.pts.size(); ++k) {
    const Vec2 t = pl.pts[k + 1] - pl.pts[k];
    // phi(R t) with R the right-normal rotation; d/dt = R^T grad phi
    const Vec2 gn = a.gradient(right_normal(t));
    const Vec2 dt(-gn.y(), gn.x());
    grad.segment<2>(2 * pl.dof[k + 1]) += w * dt;
    grad.segment<2>(2 * pl.dof[k]) -= w * dt;
  }
}

/// Gradient of the full energy with respect to the flattened DOF vector.
/// The penalty kink uses the subgradient 0, smoothed over |r| < 1e-7.
inline Eigen::VectorXd gradient(const PolyPartition& p, const EnergyModel& model) {
  require(model.is_local(), "gradient: non-local perimeters use grid moves", ErrorKind::unsupported);
  require(static_cast<int>(model.volumes.size()) == p.num_cells(), "energy model volume count != cell count");
  const Anisotropy& phi = model.norm();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(2 * p.dof_count());
  // half the sum of cell perimeters is the total skeleton length
  const std::vector<bool> bd = model.mu > 0.0 ? domain_boundary_edges(p) : std::vector<bool>(p.edges.size());
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const double w = 1.0 + (bd[e] ? 2.0 * model.mu : 0.0);
    add_length_gradient(edge_polyline(p, static_cast<int>(e)), phi, w, grad);
  }
  if (model.mode == VolumeMode::penalized) {
    const Eigen::MatrixXd jac = area_jacobian(p);
    const auto areas = cell_areas(p);
    for (int i = 0; i < p.num_cells(); ++i) {
      const double r = areas[i] - model.volumes[i];
      const double sgn = std::clamp(r / kPenaltySmoothing, -1.0, 1.0);
      grad += model.lambda * sgn * jac.row(i).transpose();
    }
  }
  return grad;
}

/// Component of grad orthogonal to every cell-area gradient.
inline Eigen::VectorXd project_gradient(const Eigen::MatrixXd& area_jac, const Eigen::VectorXd& grad) {
  if (area_jac.rows() <= 1) return grad;  // a single area is fixed by the lattice volume
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-12);
  cod.compute(area_jac * area_jac.transpose());
  return grad - area_jac.transpose() * cod.solve(area_jac * grad);
}

// ---------------------------------------------------------------------------
// Pressures.

struct EdgeArc {
  int edge = 0;
  int left = -1, right = -1;  // cells using the edge forward / backward
  double kappa = 0.0;         // positive when the center is on the left cell's side
  double rms = 0.0;
  double length = 0.0;
  bool line = true;
};

inline std::vector<EdgeArc> edge_arcs(const PolyPartition& p) {
  const auto cells = edge_cells(p);
  std::vector<EdgeArc> out;
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Polyline pl = edge_polyline(p, static_cast<int>(e));
    const ArcFit f = fit_circle(pl.pts);
    EdgeArc a;
    a.edge = static_cast<int>(e);
    a.left = cells[e].first;
    a.right = cells[e].second;
    a.kappa = signed_curvature(pl.pts, f);
    a.rms = f.rms;
    a.length = perimeter(pl.pts) - (pl.pts.back() - pl.pts.front()).norm();
    a.line = f.line;
    out.push_back(a);
  }
  return out;
}

/// One pressure per cell label with sum zero. A cell bulging into its
/// neighbours has the larger pressure.
struct PressureVector {
  std::vector<double> rho;
  double residual = 0.0;  // max_e |kappa_e - (rho_left - rho_right)|
};

/// Least-squares pressures from edge curvatures: kappa_e = rho_left - rho_right,
/// with kappa_e = 0 required on edges between a cell and its own translate.
inline PressureVector fit_pressures(const PolyPartition& p, const std::vector<EdgeArc>& arcs) {
  const int n = p.num_cells();
  const int m = static_cast<int>(arcs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m + 1, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
  for (int k = 0; k < m; ++k) {
    if (arcs[k].left != arcs[k].right) {
      a(k, arcs[k].left) += 1.0;
      a(k, arcs[k].right) -= 1.0;
    }
    b(k) = arcs[k].kappa;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> interfaces(a.topRows(m));
  require(interfaces.rank() >= n - 1, "fit_pressures: fewer independent interfaces than cells - 1");
  a.row(m).setOnes();  // gauge
  const Eigen::VectorXd rho = a.colPivHouseholderQr().solve(b);
  PressureVector out;
  out.rho.assign(rho.data(), rho.data() + n);
  for (int k = 0; k < m; ++k) out.residual = std::max(out.residual, std::abs(a.row(k).dot(rho) - b(k)));
  return out;
}

inline PressureVector fit_pressures(const PolyPartition& p) { return fit_pressures(p, edge_arcs(p)); }

}  // namespace perpart
