#pragma once

#include "perpart/constructions.hpp"
#include "perpart/energy.hpp"
#include "perpart/error.hpp"
#include "perpart/grid_partition.hpp"
#include "perpart/poly_partition.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace perpart {

enum class StepRule { fixed, backtracking };

struct OptimizerConfig {
  int max_iters = 2000;
  StepRule step_rule = StepRule::backtracking;
  double armijo = 1e-4;
  double step = 1e-2;  // fixed step, or largest first displacement of a line search
  double tol_grad = 1e-8;
  double tol_volume = 1e-10;
  double surgery_edge_min = 0.0;  // 0 selects 1e-3 sqrt(d(G))
  double split_length = 0.0;      // 0 selects 20 surgery_edge_min
  int resample_interval = 50;     // surgery + resampling period, 0 disables the periodic pass
  bool surgery = true;
  int memory = 8;  // L-BFGS pairs; 0 is projected steepest descent
  std::uint64_t seed = 1;

  // grid runs
  bool anneal = false;
  double anneal_temperature = 0.05;
  int anneal_sweeps = 20;

  // lattice runs
  double lattice_step = 0.1;
  double lattice_step_min = 2e-3;
  int lattice_evals = 200;
  int inner_iters = 400;

  void validate() const {
    require(max_iters >= 0, "optimizer: max_iters must be >= 0");
    require(armijo > 0.0 && armijo < 1.0, "optimizer: armijo constant must lie in (0, 1)");
    require(step > 0.0 && tol_grad > 0.0 && tol_volume > 0.0, "optimizer: tolerances and step must be positive");
    require(surgery_edge_min >= 0.0 && split_length >= 0.0, "optimizer: surgery lengths must be >= 0");
    require(resample_interval >= 0 && memory >= 0, "optimizer: negative interval or memory");
    require(anneal_temperature > 0.0 && anneal_sweeps >= 0, "optimizer: bad annealing schedule");
    require(lattice_step > 0.0 && lattice_step_min > 0.0 && lattice_evals > 0 && inner_iters >= 0,
            "optimizer: bad lattice descent settings");
  }

  double edge_min(const Lattice& lat) const {
    return surgery_edge_min > 0.0 ? surgery_edge_min : 1e-3 * std::sqrt(volume(lat));
  }
  double split_len(const Lattice& lat) const { return split_length > 0.0 ? split_length : 20.0 * edge_min(lat); }
};

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double volume_residual = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  std::string event;
};

enum class RunStatus { converged, max_iters, stalled, line_search_failure };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::stalled: return "stalled";
    default: return "line_search_failure";
  }
}

/// `stalled` means the predicted decrease fell below floating-point
/// resolution of the energy before tol_grad was met.
struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<std::string> surgery_events;
  bool monotone = true;
  RunStatus status = RunStatus::max_iters;
  int accepted = 0;

  double final_energy() const { return rows.empty() ? NAN : rows.back().energy; }
  double max_volume_residual() const {
    double r = 0.0;
    for (const TraceRow& t : rows) r = std::max(r, t.volume_residual);
    return r;
  }
};

namespace detail {

/// Rows since the last event-marked row must have non-increasing energy.
inline bool monotone_rows(const std::vector<TraceRow>& rows) {
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].event.empty() && rows[k].energy > rows[k - 1].energy) return false;
  return true;
}

inline std::vector<Vec2> loop_anchors(const PolyPartition& p) {
  std::vector<Vec2> a;
  for (int ci = 0; ci < p.num_cells(); ++ci)
    a.push_back(p.cells[ci].loop.empty() ? Vec2::Zero() : cell_chain(p, ci).pts.front());
  return a;
}

/// Recompute each cell's shift so its loop starts at the translate nearest
/// the old anchor point.
inline void reanchor(PolyPartition& p, const std::vector<Vec2>& anchors) {
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    Cell& c = p.cells[ci];
    if (c.loop.empty()) continue;
    const Edge& e = p.edges[c.loop.front().edge];
    const int s = c.loop.front().forward ? e.tail : e.head;
    const Eigen::VectorXd f = p.lattice.fractional(anchors[ci] - p.vertices[s]);
    c.shift = Vec2i(static_cast<int>(std::lround(f(0))), static_cast<int>(std::lround(f(1))));
  }
  for (int ci = 0; ci < p.num_cells(); ++ci) cell_chain(p, ci);  // throws on a broken loop
}

inline double polyline_length(const Polyline& pl) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < pl.pts.size(); ++k) s += (pl.pts[k + 1] - pl.pts[k]).norm();
  return s;
}

inline void resample_edge(PolyPartition& p, int e) {
  std::vector<Vec2>& samples = p.edges[e].samples;
  const int m = static_cast<int>(samples.size());
  if (m == 0) return;
  const Polyline pl = edge_polyline(p, e);
  std::vector<double> cum{0.0};
  for (std::size_t k = 0; k + 1 < pl.pts.size(); ++k) cum.push_back(cum.back() + (pl.pts[k + 1] - pl.pts[k]).norm());
  const double total = cum.back();
  if (total <= 0.0) return;
  std::size_t seg = 0;
  for (int k = 1; k <= m; ++k) {
    const double s = total * k / (m + 1.0);
    while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    samples[k - 1] = pl.pts[seg] + t * (pl.pts[seg + 1] - pl.pts[seg]);
  }
}

/// Edge ends at every vertex, counter-clockwise by outgoing tangent angle.
inline std::vector<std::vector<EdgeEnd>> vertex_ends_sorted(const PolyPartition& p) {
  auto inc = vertex_incidence(p);
  for (auto& ends : inc) {
    std::vector<std::pair<double, EdgeEnd>> keyed;
    for (const EdgeEnd& end : ends) {
      const Vec2 t = end_tangent(p, end);
      keyed.emplace_back(std::atan2(t.y(), t.x()), end);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < ends.size(); ++k) ends[k] = keyed[k].second;
  }
  return inc;
}

inline bool cells_simple(const PolyPartition& p) {
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    if (p.cells[ci].loop.empty()) continue;
    const Polygon poly = cell_polygon(p, ci);
    if (signed_area(poly) <= 0.0 || !is_simple_polygon(poly)) return false;
  }
  return true;
}

/// Move the two edge ends of `pair` (both at vertex v) onto a new vertex and
/// join it to v by a short straight edge.
inline PolyPartition split_vertex(const PolyPartition& p, int v, const std::array<EdgeEnd, 2>& pair, double len,
                                  int samples) {
  const std::vector<Vec2> anchors = loop_anchors(p);
  PolyPartition q = p;
  const Vec2 t0 = end_tangent(p, pair[0]), t1 = end_tangent(p, pair[1]);
  Vec2 u = t0 + t1;
  u = u.norm() > 1e-9 ? Vec2(u.normalized()) : Vec2(-t0.y(), t0.x());
  const int w = static_cast<int>(q.vertices.size());
  q.vertices.push_back(p.vertices[v] + 0.5 * len * u);
  q.vertices[v] -= 0.5 * len * u;
  for (const EdgeEnd& end : pair) (end.at_tail ? q.edges[end.edge].tail : q.edges[end.edge].head) = w;
  const int ne = static_cast<int>(q.edges.size());
  q.edges.push_back({v, w, Vec2i::Zero(), straight_samples(q.vertices[v], q.vertices[w], samples)});

  auto moved = [&](const EdgeEnd& x) { return x == pair[0] || x == pair[1]; };
  for (Cell& c : q.cells) {
    const std::vector<EdgeRef> old = c.loop;
    const std::size_t n = old.size();
    c.loop.clear();
    for (std::size_t k = 0; k < n; ++k) {
      c.loop.push_back(old[k]);
      const EdgeRef& a = old[k];
      const EdgeRef& b = old[(k + 1) % n];
      const Edge& ea = p.edges[a.edge];
      if ((a.forward ? ea.head : ea.tail) != v) continue;
      const bool in_moved = moved({a.edge, !a.forward});
      const bool out_moved = moved({b.edge, b.forward});
      if (in_moved && !out_moved) c.loop.push_back({ne, false});
      if (!in_moved && out_moved) c.loop.push_back({ne, true});
    }
  }
  reanchor(q, anchors);
  return q;
}

/// Merge the endpoints of edge e into its tail; nullopt when the edge closes
/// around the torus or some cell would drop below three edge uses.
inline std::optional<PolyPartition> collapse_edge(const PolyPartition& p, int e) {
  const Edge ed = p.edges[e];
  const int a = ed.tail, b = ed.head;
  if (a == b) return std::nullopt;
  const std::vector<Vec2> anchors = loop_anchors(p);
  PolyPartition q = p;
  const Vec2 off = p.offset(ed.wrap);
  q.vertices[a] = 0.5 * (p.vertices[a] + p.vertices[b] + off);
  for (std::size_t f = 0; f < q.edges.size(); ++f) {
    if (static_cast<int>(f) == e) continue;
    Edge& x = q.edges[f];
    if (x.tail == b) {
      x.tail = a;
      for (Vec2& s : x.samples) s += off;
      x.wrap += ed.wrap;
    }
    if (x.head == b) {
      x.head = a;
      x.wrap -= ed.wrap;
    }
  }
  for (Cell& c : q.cells) {
    std::erase_if(c.loop, [&](const EdgeRef& r) { return r.edge == e; });
    if (c.loop.size() < 3) return std::nullopt;
    for (EdgeRef& r : c.loop)
      if (r.edge > e) --r.edge;
  }
  q.edges.erase(q.edges.begin() + e);
  q.vertices.erase(q.vertices.begin() + b);
  for (Edge& x : q.edges) {
    if (x.tail > b) --x.tail;
    if (x.head > b) --x.head;
  }
  reanchor(q, anchors);
  return q;
}

/// T1 move: collapse edge e and split the resulting degree-4 vertex along
/// the other pairing, so the new edge separates the two cells that were kept
/// apart by e. nullopt when the collapse is invalid or the flip is ambiguous.
inline std::optional<PolyPartition> t1_flip(const PolyPartition& p, int e, double len, int samples) {
  const auto before = edge_cells(p)[e];
  auto q = collapse_edge(p, e);
  if (!q) return std::nullopt;
  const int v = p.edges[e].tail - (p.edges[e].tail > p.edges[e].head ? 1 : 0);
  const auto ends = vertex_ends_sorted(*q)[v];
  if (ends.size() != 4) return std::nullopt;
  const auto cells = edge_cells(*q);
  // wedge k lies counter-clockwise after end k, on the left of its outgoing direction
  std::array<int, 4> wedge{};
  for (int k = 0; k < 4; ++k)
    wedge[k] = ends[k].at_tail ? cells[ends[k].edge].first : cells[ends[k].edge].second;
  auto same = [&](int a, int b) { return std::minmax(a, b) == std::minmax(before.first, before.second); };
  // moving ends k, k+1 makes the new edge separate wedges k+1 and k+3
  const bool flip0 = !same(wedge[1], wedge[3]), flip1 = !same(wedge[2], wedge[0]);
  if (flip0 == flip1) return std::nullopt;
  const int k = flip0 ? 0 : 1;
  double first = INFINITY;
  for (const EdgeEnd& end : ends) {
    const Polyline pl = edge_polyline(*q, end.edge);
    const std::size_t n = pl.pts.size();
    first = std::min(first, end.at_tail ? (pl.pts[1] - pl.pts[0]).norm() : (pl.pts[n - 1] - pl.pts[n - 2]).norm());
  }
  PolyPartition r = split_vertex(*q, v, {ends[k], ends[k + 1]}, std::min(len, 0.3 * first), samples);
  for (std::size_t f = 0; f < r.edges.size(); ++f) resample_edge(r, static_cast<int>(f));
  return r;
}

/// Shortest edge with distinct endpoints, or -1 when none is below `bound`.
inline std::pair<int, double> shortest_edge(const PolyPartition& p, double bound) {
  std::pair<int, double> best{-1, bound};
  for (std::size_t k = 0; k < p.edges.size(); ++k) {
    if (p.edges[k].tail == p.edges[k].head) continue;
    const double len = polyline_length(edge_polyline(p, static_cast<int>(k)));
    if (len < best.second) best = {static_cast<int>(k), len};
  }
  return best;
}

inline int max_samples(const PolyPartition& p) {
  int m = 0;
  for (const Edge& e : p.edges) m = std::max(m, static_cast<int>(e.samples.size()));
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Topology surgery.

struct SurgeryReport {
  PolyPartition state;
  bool changed = false;
  bool rejected = false;
  int collapsed = 0;
  int split = 0;
  std::vector<std::string> events;
};

/// Collapse short edges, split junctions of degree >= 4 along the adjacent
/// pairing with the lowest energy (only when it lowers the energy), then
/// resample every edge to uniform arc length. Areas are not restored.
inline SurgeryReport surgery_report(const PolyPartition& p, const OptimizerConfig& cfg, const EnergyModel& model) {
  SurgeryReport rep;
  PolyPartition q = p;
  const double emin = cfg.edge_min(p.lattice);

  for (int guard = 0; guard < 10 * static_cast<int>(p.edges.size()) + 10; ++guard) {
    int best = -1;
    double shortest = emin;
    for (std::size_t e = 0; e < q.edges.size(); ++e) {
      if (q.edges[e].tail == q.edges[e].head) continue;
      const double len = detail::polyline_length(edge_polyline(q, static_cast<int>(e)));
      if (len < shortest) {
        shortest = len;
        best = static_cast<int>(e);
      }
    }
    if (best < 0) break;
    auto r = detail::collapse_edge(q, best);
    if (!r) {
      rep.state = p;
      rep.rejected = true;
      rep.events.push_back("rejected: collapsing edge " + std::to_string(best) + " leaves a cell with < 3 edges");
      return rep;
    }
    q = std::move(*r);
    ++rep.collapsed;
    rep.events.push_back("collapse edge " + std::to_string(best) + " (length " + std::to_string(shortest) + ")");
  }

  int samples = 0;
  for (const Edge& e : q.edges) samples = std::max(samples, static_cast<int>(e.samples.size()));
  std::vector<char> kept;
  for (int guard = 0; guard < 1000; ++guard) {
    const auto inc = detail::vertex_ends_sorted(q);
    kept.resize(q.vertices.size(), 0);
    int v = -1;
    for (std::size_t k = 0; k < inc.size() && v < 0; ++k)
      if (inc[k].size() >= 4 && !kept[k]) v = static_cast<int>(k);
    if (v < 0) break;
    const auto& ends = inc[v];
    double first = INFINITY;
    for (const EdgeEnd& end : ends) {
      const Polyline pl = edge_polyline(q, end.edge);
      const std::size_t n = pl.pts.size();
      first = std::min(first, end.at_tail ? (pl.pts[1] - pl.pts[0]).norm() : (pl.pts[n - 1] - pl.pts[n - 2]).norm());
    }
    const double len = std::min(cfg.split_len(q.lattice), 0.3 * first);
    const double e0 = total_energy(q, model).total;
    std::optional<PolyPartition> best;
    double best_e = e0;
    std::array<std::pair<int, int>, 2> best_key{};
    for (std::size_t k = 0; k < ends.size(); ++k) {
      const std::array<EdgeEnd, 2> pair{ends[k], ends[(k + 1) % ends.size()]};
      PolyPartition cand = detail::split_vertex(q, v, pair, len, samples);
      const double ec = total_energy(cand, model).total;
      std::array<std::pair<int, int>, 2> key{std::pair{pair[0].edge, int(pair[0].at_tail)},
                                             std::pair{pair[1].edge, int(pair[1].at_tail)}};
      std::sort(key.begin(), key.end());
      const bool better = ec < best_e - 1e-12 || (best && std::abs(ec - best_e) <= 1e-12 && key < best_key);
      if (better && ec < e0 - 1e-12) {
        best = std::move(cand);
        best_e = ec;
        best_key = key;
      }
    }
    if (!best) {
      kept[v] = 1;
      rep.events.push_back("kept degree-" + std::to_string(ends.size()) + " vertex " + std::to_string(v) +
                           " (no split lowers the energy)");
      continue;
    }
    q = std::move(*best);
    ++rep.split;
    rep.events.push_back("split degree-" + std::to_string(ends.size()) + " vertex " + std::to_string(v));
  }

  for (std::size_t e = 0; e < q.edges.size(); ++e) detail::resample_edge(q, static_cast<int>(e));
  rep.changed = rep.collapsed + rep.split > 0;
  rep.state = std::move(q);
  return rep;
}

inline SurgeryReport surgery_report(const PolyPartition& p, const OptimizerConfig& cfg) {
  return surgery_report(p, cfg, EnergyModel::classical(cell_areas(p)));
}

inline PolyPartition surgery(const PolyPartition& p, const OptimizerConfig& cfg) {
  return surgery_report(p, cfg).state;
}

// ---------------------------------------------------------------------------
// Polygonal descent.

struct PolyRun {
  PolyPartition state;
  RunTrace trace;
};

namespace detail {

/// Sobolev-type metric M = I + beta L on the DOF points, with L the graph
/// Laplacian of the polyline chains. Displacements M^-1 v are smooth along
/// edges and across junctions.
class ChainMetric {
 public:
  explicit ChainMetric(const PolyPartition& p) : n_(p.dof_count()) {
    int m = 0;
    for (const Edge& e : p.edges) m = std::max(m, static_cast<int>(e.samples.size()));
    const double beta = 0.25 * (m + 1) * (m + 1);
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < n_; ++k) t.emplace_back(k, k, 1.0);
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      const Polyline pl = edge_polyline(p, static_cast<int>(e));
      for (std::size_t k = 0; k + 1 < pl.dof.size(); ++k) {
        const int a = pl.dof[k], b = pl.dof[k + 1];
        t.emplace_back(a, a, beta);
        t.emplace_back(b, b, beta);
        t.emplace_back(a, b, -beta);
        t.emplace_back(b, a, -beta);
      }
    }
    Eigen::SparseMatrix<double> mat(n_, n_);
    mat.setFromTriplets(t.begin(), t.end());
    ldlt_.compute(mat);
    require(ldlt_.info() == Eigen::Success, "metric factorization failed", ErrorKind::numerical_failure);
  }

  int size() const { return n_; }

  /// M^-1 applied to a flattened (x0, y0, x1, ...) vector.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
    using Rows = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
    const Rows r = Eigen::Map<const Rows>(v.data(), n_, 2);
    const Rows s = ldlt_.solve(Eigen::MatrixXd(r));
    return Eigen::Map<const Eigen::VectorXd>(s.data(), 2 * n_);
  }

  /// Columns M^-1 J^T and the Gram matrix J M^-1 J^T.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gram(const Eigen::MatrixXd& jac) const {
    Eigen::MatrixXd w(jac.cols(), jac.rows());
    for (int i = 0; i < jac.rows(); ++i) w.col(i) = solve(jac.row(i).transpose());
    return {w, jac * w};
  }

 private:
  int n_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

inline Eigen::VectorXd gram_solve(const Eigen::MatrixXd& g, const Eigen::VectorXd& r) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-12);
  cod.compute(g);
  return cod.solve(r);
}

/// Gauss-Newton area restoration with minimum-M-norm steps.
inline void restore_areas_metric(PolyPartition& p, const std::vector<double>& target, const ChainMetric& metric,
                                 double tol = 1e-12, int max_iter = 50) {
  for (int it = 0; it <= max_iter; ++it) {
    const auto areas = cell_areas(p);
    Eigen::VectorXd res(p.num_cells());
    for (int i = 0; i < p.num_cells(); ++i) res(i) = areas[i] - target[i];
    if (res.cwiseAbs().maxCoeff() <= tol) return;
    require(it < max_iter, "volume correction infeasible", ErrorKind::numerical_failure);
    const Eigen::MatrixXd jac = area_jacobian(p);
    const auto [w, g] = metric.gram(jac);
    const Eigen::VectorXd lam = gram_solve(g, res);
    require(lam.allFinite() && (g * lam - res).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + res.cwiseAbs().maxCoeff()),
            "volume correction infeasible", ErrorKind::numerical_failure);
    p.set_positions(p.positions() - w * lam);
  }
}

}  // namespace detail

/// Descent at fixed lattice. Constrained mode projects every trial point back
/// onto the volume constraints (Gauss-Newton on the Gram system of area
/// gradients) and moves along tangent directions; penalized mode descends the
/// penalized energy directly. Directions are L-BFGS on the projected
/// gradients, preconditioned by a chain-Laplacian metric, with an Armijo
/// backtracking line search.
inline PolyRun minimize_poly(const PolyPartition& init, const EnergyModel& model, const OptimizerConfig& cfg) {
  cfg.validate();
  validate(init);
  model.validate(volume(init.lattice));
  require(model.is_local(), "minimize_poly: non-local perimeters are minimized on grids", ErrorKind::unsupported);
  require(static_cast<int>(model.volumes.size()) == init.num_cells(), "energy model volume count != cell count");
  const bool constrained = model.mode == VolumeMode::constrained;
  const double scale = std::sqrt(volume(init.lattice) / init.num_cells());

  PolyRun run{init, {}};
  PolyPartition& x = run.state;
  RunTrace& tr = run.trace;
  auto metric = std::make_unique<detail::ChainMetric>(x);

  // false when the projection fails or folds a cell
  auto project = [&](PolyPartition& s, const std::vector<double>& target) {
    if (constrained) {
      try {
        detail::restore_areas_metric(s, target, *metric);
      } catch (const Error&) {
        return false;
      }
    }
    return detail::cells_simple(s);
  };
  auto residual = [&](const PolyPartition& s) {
    const auto a = cell_areas(s);
    double r = 0.0;
    for (int i = 0; i < s.num_cells(); ++i) r = std::max(r, std::abs(a[i] - model.volumes[i]));
    return r;
  };
  auto energy = [&](const PolyPartition& s) { return total_energy(s, model).total; };

  // Restore `target` on a re-topologized state; the metric follows the state.
  auto adopt = [&](PolyPartition& s, const std::vector<double>& target) {
    auto next = std::make_unique<detail::ChainMetric>(s);
    std::swap(metric, next);
    if (project(s, target)) return true;
    std::swap(metric, next);
    return false;
  };
  // Collapse the shortest edge when it is short on the cell scale and re-split
  // under `m`.
  auto collapse_shortest = [&](const PolyPartition& s, const EnergyModel& m,
                               const std::vector<double>& target) -> std::optional<SurgeryReport> {
    const auto [e, len] = detail::shortest_edge(s, 0.1 * scale);
    if (e < 0) return std::nullopt;
    OptimizerConfig c = cfg;
    c.surgery_edge_min = len * (1.0 + 1e-9);
    c.split_length = cfg.split_len(s.lattice);
    SurgeryReport r = surgery_report(s, c, m);
    if (r.rejected || !r.changed || !adopt(r.state, target)) return std::nullopt;
    return r;
  };

  if (constrained) {
    PolyPartition direct = x;
    if (project(direct, model.volumes)) {
      x = std::move(direct);
    } else {
      // continuation: walk the targets from the current areas, relaxing in
      // between and passing T1 events by edge collapse when stuck
      const std::vector<double> a0 = cell_areas(x);
      OptimizerConfig relax = cfg;
      relax.max_iters = 50;
      relax.surgery = false;
      auto targets_at = [&](double t) {
        EnergyModel mid = model;
        for (int i = 0; i < x.num_cells(); ++i) mid.volumes[i] = a0[i] + t * (model.volumes[i] - a0[i]);
        return mid;
      };
      double t = 0.0, dt = 0.5;
      int flips = 0;
      while (t < 1.0) {
        const double tt = std::min(1.0, t + dt);
        const EnergyModel mid = targets_at(tt);
        PolyPartition trial = x;
        if (project(trial, mid.volumes)) {
          x = minimize_poly(trial, mid, relax).state;
          t = tt;
          dt *= 2.0;
          continue;
        }
        dt *= 0.5;
        if (dt < 1.0 / 64 && flips < 4 * static_cast<int>(x.edges.size())) {
          // stuck on a shrinking edge: flip it, else let the energy pick the split
          const EnergyModel here = targets_at(t);
          const int e = detail::shortest_edge(x, 0.1 * scale).first;
          std::optional<PolyPartition> r;
          if (e >= 0) r = detail::t1_flip(x, e, cfg.split_len(x.lattice), detail::max_samples(x));
          if (r && adopt(*r, here.volumes)) {
            x = std::move(*r);
            ++flips;
            dt = 0.25;
            continue;
          }
          if (auto c = collapse_shortest(x, here, here.volumes)) {
            x = std::move(c->state);
            ++flips;
            dt = 0.25;
            continue;
          }
        }
        require(dt > 1e-4, "minimize_poly: cannot reach the target volumes from this state",
                ErrorKind::numerical_failure);
      }
    }
  }

  std::string pending;
  auto do_surgery = [&](int it) {
    SurgeryReport r = surgery_report(x, cfg, model);
    for (const std::string& ev : r.events) tr.surgery_events.push_back("iter " + std::to_string(it) + ": " + ev);
    if (r.rejected) return;
    PolyPartition s = std::move(r.state);
    std::unique_ptr<detail::ChainMetric> old;
    if (r.changed) {
      old = std::move(metric);
      metric = std::make_unique<detail::ChainMetric>(s);
    }
    if (!project(s, model.volumes)) {
      tr.surgery_events.push_back("iter " + std::to_string(it) + ": surgery discarded (volume restore failed)");
      if (r.changed) metric = std::move(old);
      return;
    }
    x = std::move(s);
    pending = r.changed ? "surgery" : "resample";
  };
  if (cfg.surgery) do_surgery(0);

  // A stuck descent often sits just before a T1 event: keep a collapse only
  // if the energy drops.
  auto rescue = [&](int it, double e_now) {
    if (!cfg.surgery) return false;
    std::unique_ptr<detail::ChainMetric> keep = std::make_unique<detail::ChainMetric>(x);
    auto r = collapse_shortest(x, model, model.volumes);
    if (!r) return false;
    if (energy(r->state) >= e_now - 1e-12 * std::max(1.0, std::abs(e_now))) {
      metric = std::move(keep);
      return false;
    }
    for (const std::string& ev : r->events) tr.surgery_events.push_back("iter " + std::to_string(it) + ": rescue " + ev);
    x = std::move(r->state);
    pending = "surgery";
    return true;
  };
  int rescues = 0;

  double e = energy(x);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;
  Eigen::VectorXd x_prev, g_prev;
  double sd_step = -1.0;
  double last_step = 0.0;

  for (int it = 0;; ++it) {
    if (cfg.surgery && cfg.resample_interval > 0 && it > 0 && it % cfg.resample_interval == 0) {
      do_surgery(it);
      mem.clear();
      x_prev.resize(0);
      e = energy(x);
    }
    const Eigen::VectorXd g_full = gradient(x, model);
    Eigen::MatrixXd jac, w, gram;
    Eigen::VectorXd g = g_full;
    if (constrained) {
      jac = area_jacobian(x);
      g = project_gradient(jac, g_full);
      std::tie(w, gram) = metric->gram(jac);
    }
    // M-orthogonal projection of M^-1 v onto the tangent space of the constraints
    auto precondition = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      Eigen::VectorXd r = metric->solve(v);
      if (constrained) r -= w * detail::gram_solve(gram, jac * r);
      return r;
    };
    const double gnorm = g.norm();
    tr.rows.push_back({it, e, residual(x), gnorm, last_step, pending});
    pending.clear();
    if (gnorm <= cfg.tol_grad) {
      tr.status = RunStatus::converged;
      break;
    }
    if (it >= cfg.max_iters) {
      tr.status = RunStatus::max_iters;
      break;
    }
    const Eigen::VectorXd xv = x.positions();
    if (x_prev.size() == xv.size() && cfg.memory > 0) {
      const Eigen::VectorXd s = xv - x_prev, y = g - g_prev;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        mem.emplace_back(s, y);
        if (static_cast<int>(mem.size()) > cfg.memory) mem.pop_front();
      }
    }
    x_prev = xv;
    g_prev = g;

    Eigen::VectorXd d;
    if (cfg.step_rule == StepRule::backtracking && !mem.empty()) {
      Eigen::VectorXd q = g;
      std::vector<double> alpha(mem.size());
      for (std::size_t k = mem.size(); k-- > 0;) {
        alpha[k] = mem[k].first.dot(q) / mem[k].first.dot(mem[k].second);
        q -= alpha[k] * mem[k].second;
      }
      const Eigen::VectorXd& yl = mem.back().second;
      const double gamma = mem.back().first.dot(yl) / yl.dot(precondition(yl));
      Eigen::VectorXd r = gamma * precondition(q);
      for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = mem[k].second.dot(r) / mem[k].first.dot(mem[k].second);
        r += (alpha[k] - beta) * mem[k].first;
      }
      d = -r;
      if (constrained) d -= w * detail::gram_solve(gram, jac * d);
      if (!(d.dot(g) < -1e-12 * d.norm() * gnorm)) mem.clear();
    }
    if (mem.empty() || cfg.step_rule == StepRule::fixed) d = -precondition(g_full);
    const double slope = d.dot(g_full);
    const double dmax = d.cwiseAbs().maxCoeff();
    const double cap = 0.1 * scale / dmax;

    auto trial_at = [&](double a, PolyPartition& out) {
      out = x;
      out.set_positions(xv + a * d);
      return project(out, model.volumes);
    };

    PolyPartition trial;
    if (cfg.step_rule == StepRule::fixed) {
      const double a = std::min(cfg.step / dmax, cap);
      if (!trial_at(a, trial)) {
        tr.status = RunStatus::line_search_failure;
        break;
      }
      x = std::move(trial);
      e = energy(x);
      last_step = a;
      ++tr.accepted;
      continue;
    }

    const bool quasi_newton = !mem.empty();
    if (sd_step < 0.0) sd_step = cfg.step / dmax;
    const double a0 = std::min(quasi_newton ? 1.0 : sd_step, cap);
    double a = a0;
    bool ok = false;
    while (true) {
      if (trial_at(a, trial)) {
        const double et = energy(trial);
        if (et <= e + cfg.armijo * a * slope) {
          ok = true;
          e = et;
          break;
        }
      }
      a *= 0.5;
      if (a * dmax < 1e-14 * scale || -a * slope < 8.0 * std::numeric_limits<double>::epsilon() * std::abs(e)) break;
    }
    if (!ok) {
      if (rescues < 20 && rescue(it, e)) {
        ++rescues;
        mem.clear();
        x_prev.resize(0);
        sd_step = -1.0;
        e = energy(x);
        continue;
      }
      // predicted gain of the first trial already at round-off level of E
      const bool roundoff = -a0 * slope < 1e-10 * std::max(1.0, std::abs(e));
      tr.status = roundoff ? RunStatus::stalled : RunStatus::line_search_failure;
      if (tr.rows.back().event.empty()) tr.rows.back().event = to_string(tr.status);
      break;
    }
    x = std::move(trial);
    last_step = a;
    ++tr.accepted;
    if (!quasi_newton) sd_step = 2.0 * a;
  }

  // Penalized descent parks on the kink of |area - v| once areas match; from
  // there only moves along the constraint manifold help, so finish with a
  // constrained run and keep it if the penalized energy drops.
  const double vsum = std::accumulate(model.volumes.begin(), model.volumes.end(), 0.0);
  if (!constrained && tr.status != RunStatus::converged && tr.status != RunStatus::max_iters &&
      residual(x) <= 1e-6 * scale * scale && std::abs(vsum - volume(x.lattice)) <= 1e-9 * volume(x.lattice)) {
    EnergyModel cm = model;
    cm.mode = VolumeMode::constrained;
    cm.lambda = 0.0;
    OptimizerConfig cc = cfg;
    cc.max_iters = std::max(0, cfg.max_iters - tr.rows.back().iter);
    try {
      PolyRun polish = minimize_poly(x, cm, cc);
      if (energy(polish.state) < e - 1e-12 * std::max(1.0, std::abs(e))) {
        const int base = tr.rows.back().iter + 1;
        const std::size_t first = tr.rows.size();
        for (TraceRow row : polish.trace.rows) {
          row.iter += base;
          tr.rows.push_back(row);
        }
        tr.rows[first].event = "polish";
        // polish rows carry the constrained energy; close with the penalized one
        TraceRow last = tr.rows.back();
        last.energy = energy(polish.state);
        last.event = "polish_end";
        ++last.iter;
        tr.rows.push_back(last);
        for (const std::string& ev : polish.trace.surgery_events) tr.surgery_events.push_back("polish " + ev);
        tr.accepted += polish.trace.accepted;
        tr.status = polish.trace.status;
        x = std::move(polish.state);
      }
    } catch (const Error&) {
      // keep the penalized result
    }
  }
  tr.monotone = detail::monotone_rows(tr.rows);
  return run;
}

// ---------------------------------------------------------------------------
// Lattice descent.

/// Apply the linear map taking the state's lattice basis to `to`.
inline PolyPartition transport(const PolyPartition& p, const Lattice& to) {
  const Eigen::Matrix2d a = to.basis() * p.lattice.basis().inverse();
  PolyPartition q = p;
  q.lattice = to;
  for (Vec2& v : q.vertices) v = a * v;
  for (Edge& e : q.edges)
    for (Vec2& s : e.samples) s = a * s;
  return q;
}

/// Replace e2 by e2 - k e1 (same lattice); wraps and shifts follow.
inline PolyPartition shear_basis(const PolyPartition& p, int k) {
  PolyPartition q = p;
  const Vec2 e1 = p.lattice.e(0), e2 = p.lattice.e(1);
  q.lattice = Lattice::planar(e1, e2 - k * e1);
  for (Edge& e : q.edges) e.wrap.x() += k * e.wrap.y();
  for (Cell& c : q.cells) c.shift.x() += k * c.shift.y();
  return q;
}

inline Lattice shape_lattice(double t, double p, double vol) { return Lattice::planar({t, 0.0}, {p, vol / t}); }

struct LatticeRun {
  Lattice lattice = Lattice::square();
  PolyPartition state;
  RunTrace trace;
};

/// Coordinate descent over (log t, p) for the basis ((t, 0), (p, d/t)) with
/// an inner minimize_poly per evaluation, warm-started from the best state.
inline LatticeRun minimize_lattice(const PolyPartition& init, const EnergyModel& model, const OptimizerConfig& cfg) {
  cfg.validate();
  require(init.lattice.dim() == 2, "minimize_lattice: planar lattices only", ErrorKind::unsupported);
  const Vec2 e1 = init.lattice.e(0), e2 = init.lattice.e(1);
  const double det = cross(e1, e2);
  require(det > 0.0, "minimize_lattice: basis must be positively oriented");
  const double vol = det;
  double t = e1.norm(), sh = e1.dot(e2) / t;

  OptimizerConfig inner = cfg;
  inner.max_iters = cfg.inner_iters;
  LatticeRun out;
  RunTrace& tr = out.trace;
  int evals = 0;
  auto eval = [&](double tt, double pp, const PolyPartition& warm) {
    PolyRun r = minimize_poly(transport(warm, shape_lattice(tt, pp, vol)), model, inner);
    // keep the shear reduced so cells stay well shaped
    const int k = static_cast<int>(std::lround(pp / tt));
    if (k != 0) r.state = shear_basis(r.state, k);
    ++evals;
    return r;
  };

  PolyRun best = eval(t, sh, init);
  sh -= std::lround(sh / t) * t;
  double best_e = best.trace.final_energy();
  tr.rows.push_back({0, best_e, best.trace.max_volume_residual(), best.trace.rows.back().grad_norm, 0.0,
                     "t=" + std::to_string(t) + " p=" + std::to_string(sh)});
  double h = cfg.lattice_step;
  while (h >= cfg.lattice_step_min && evals < cfg.lattice_evals) {
    bool improved = false;
    const double cands[4][2] = {{t * std::exp(h), sh}, {t * std::exp(-h), sh}, {t, sh + h * t}, {t, sh - h * t}};
    for (const auto& c : cands) {
      if (evals >= cfg.lattice_evals) break;
      PolyRun r = eval(c[0], c[1], best.state);
      const double er = r.trace.final_energy();
      if (er < best_e - 1e-12) {
        best = std::move(r);
        best_e = er;
        t = c[0];
        sh = c[1] - std::lround(c[1] / c[0]) * c[0];
        improved = true;
        tr.rows.push_back({evals, best_e, best.trace.max_volume_residual(), best.trace.rows.back().grad_norm, h,
                           ""});
        break;
      }
    }
    if (!improved) h *= 0.5;
  }
  tr.status = h < cfg.lattice_step_min ? RunStatus::converged : RunStatus::max_iters;
  tr.accepted = static_cast<int>(tr.rows.size()) - 1;
  tr.monotone = detail::monotone_rows(tr.rows);
  for (const std::string& s : best.trace.surgery_events) tr.surgery_events.push_back(s);
  out.lattice = best.state.lattice;
  out.state = std::move(best.state);
  return out;
}

/// Starts from the slab partition of `init`.
inline LatticeRun minimize_lattice(const Lattice& init, const EnergyModel& model, const OptimizerConfig& cfg) {
  return minimize_lattice(slab_partition(init, model.volumes), model, cfg);
}

// ---------------------------------------------------------------------------
// Grid descent.

struct GridRun {
  GridPartition state;
  RunTrace trace;
};

namespace detail {

/// Incremental energy bookkeeping for single-pixel relabelings.
class GridMoves {
 public:
  GridMoves(const GridPartition& g, const EnergyModel& model) : g_(g), model_(model), pv_(g.pixel_volume()) {
    if (model.is_local()) {
      w1_ = model.norm()(right_normal(g.lattice.e(1) / g.n));
      w2_ = model.norm()(right_normal(g.lattice.e(0) / g.n));
    } else {
      require(model.mu == 0.0, "minimize_grid: mu > 0 with a non-local perimeter is not implemented",
              ErrorKind::unsupported);
      model.kernel.validate();
      kp_.emplace(g, model.kernel, truncation_radius(g, model.kernel));
      field_.assign(static_cast<std::size_t>(g.num_labels + 1) * g.size(), 0.0);
      for (int x = 0; x < g.size(); ++x)
        for (int y = 0; y < g.size(); ++y)
          if (y != x) field_[slot(g.labels[y], x)] += pair(x, y);
    }
    counts_.assign(g.num_labels + 1, 0);
    for (int l : g.labels) ++counts_[l];
  }

  const GridPartition& grid() const { return g_; }

  /// Interaction weight of the unordered pixel pair in the half-sum energy.
  double pair(int x, int y) const {
    if (kp_) return (*kp_)(g_.col(x) - g_.col(y), g_.row(x) - g_.row(y)) * pv_ * pv_;
    const auto nb = g_.neighbors4(x);
    double w = 0.0;
    for (int k = 0; k < 4; ++k)
      if (nb[k] == y) w += k < 2 ? w1_ : w2_;
    return w;
  }

  /// Interaction of x with all other pixels carrying label l.
  double field(int x, int l) const {
    if (kp_) return field_[slot(l, x)];  // x itself is excluded by construction
    const auto nb = g_.neighbors4(x);
    double s = 0.0;
    for (int k = 0; k < 4; ++k)
      if (nb[k] != x && g_.labels[nb[k]] == l) s += k < 2 ? w1_ : w2_;
    return s;
  }

  double penalty_delta(int a, int b, int times = 1) const {
    if (model_.mode != VolumeMode::penalized) return 0.0;
    auto dev = [&](int l, int c) { return std::abs(c * pv_ - model_.volumes[l - 1]); };
    return model_.lambda * (dev(a, counts_[a] - times) - dev(a, counts_[a]) + dev(b, counts_[b] + times) -
                            dev(b, counts_[b]));
  }

  /// Energy change of relabeling x to b.
  double flip_delta(int x, int b) const {
    const int a = g_.labels[x];
    if (a == b) return 0.0;
    return field(x, a) - field(x, b) + penalty_delta(a, b);
  }

  /// Energy change of exchanging the labels of x (a) and y (b).
  double swap_delta(int x, int y) const {
    const int a = g_.labels[x], b = g_.labels[y];
    if (a == b) return 0.0;
    return field(x, a) - field(x, b) + field(y, b) - field(y, a) + 2.0 * pair(x, y);
  }

  void flip(int x, int b) {
    const int a = g_.labels[x];
    if (a == b) return;
    if (kp_) {
      for (int y = 0; y < g_.size(); ++y) {
        if (y == x) continue;
        const double w = pair(x, y);
        field_[slot(a, y)] -= w;
        field_[slot(b, y)] += w;
      }
    }
    g_.labels[x] = b;
    --counts_[a];
    ++counts_[b];
  }

  bool boundary(int x) const {
    for (int y : g_.neighbors4(x))
      if (g_.labels[y] != g_.labels[x]) return true;
    return false;
  }

  double energy() const {
    if (!kp_) return evaluate(g_, model_).total;
    double half = 0.0, pen = 0.0;
    for (int l = 1; l <= g_.num_labels; ++l) {
      std::vector<char> in(g_.size());
      for (int q = 0; q < g_.size(); ++q) in[q] = g_.labels[q] == l;
      if (counts_[l] > 0 && counts_[l] < g_.size()) half += nonlocal_sum(g_, in, *kp_);
      if (model_.mode == VolumeMode::penalized) pen += model_.lambda * std::abs(counts_[l] * pv_ - model_.volumes[l - 1]);
    }
    return 0.5 * half + pen;
  }

  double residual() const {
    double r = 0.0;
    for (int l = 1; l <= g_.num_labels; ++l) r = std::max(r, std::abs(counts_[l] * pv_ - model_.volumes[l - 1]));
    return r;
  }

 private:
  std::size_t slot(int l, int x) const { return static_cast<std::size_t>(l) * g_.size() + x; }

  GridPartition g_;
  const EnergyModel& model_;
  double pv_;
  double w1_ = 0.0, w2_ = 0.0;
  std::optional<PeriodizedKernel> kp_;
  std::vector<double> field_;
  std::vector<int> counts_;
};

inline std::vector<int> neighbor_labels(const GridPartition& g, int x) {
  std::vector<int> out;
  for (int y : g.neighbors4(x))
    if (g.labels[y] != g.labels[x]) out.push_back(g.labels[y]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Label-flip descent on grids. Penalized runs use single boundary-pixel
/// flips plus whole-component relabelings; constrained runs use label swaps
/// between boundary pixels, which keep every count fixed. An optional
/// seeded annealing phase precedes the greedy phase.
inline GridRun minimize_grid(const GridPartition& init, const EnergyModel& model, const OptimizerConfig& cfg) {
  cfg.validate();
  validate(init);
  require(static_cast<int>(model.volumes.size()) == init.num_labels, "energy model volume count != label count");
  model.validate(volume(init.lattice));
  const bool penalized = model.mode == VolumeMode::penalized;
  detail::GridMoves mv(init, model);
  GridRun run;
  RunTrace& tr = run.trace;
  const double tiny = 1e-12;

  if (cfg.anneal) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, init.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < cfg.anneal_sweeps; ++s) {
      const double temp = cfg.anneal_temperature * (1.0 - static_cast<double>(s) / cfg.anneal_sweeps);
      for (int k = 0; k < init.size(); ++k) {
        const int x = pick(rng);
        if (!mv.boundary(x)) continue;
        const auto nl = detail::neighbor_labels(mv.grid(), x);
        const int b = nl[std::uniform_int_distribution<int>(0, static_cast<int>(nl.size()) - 1)(rng)];
        if (penalized) {
          const double d = mv.flip_delta(x, b);
          if (d <= 0.0 || unit(rng) < std::exp(-d / temp)) mv.flip(x, b);
        } else {
          const int a = mv.grid().labels[x];
          std::vector<int> partners;
          for (int y = 0; y < init.size(); ++y)
            if (mv.grid().labels[y] == b && mv.boundary(y)) {
              const auto ny = detail::neighbor_labels(mv.grid(), y);
              if (std::binary_search(ny.begin(), ny.end(), a)) partners.push_back(y);
            }
          if (partners.empty()) continue;
          const int y = partners[std::uniform_int_distribution<int>(0, static_cast<int>(partners.size()) - 1)(rng)];
          const double d = mv.swap_delta(x, y);
          if (d <= 0.0 || unit(rng) < std::exp(-d / temp)) {
            mv.flip(x, b);
            mv.flip(y, a);
          }
        }
      }
      tr.rows.push_back({s, mv.energy(), mv.residual(), 0.0, temp, "anneal"});
    }
  }

  double e = mv.energy();
  tr.rows.push_back({0, e, mv.residual(), 0.0, 0.0, cfg.anneal ? "greedy" : ""});
  tr.status = RunStatus::max_iters;
  for (int sweep = 1; sweep <= std::max(cfg.max_iters, 1); ++sweep) {
    int moves = 0;
    for (int x = 0; x < init.size(); ++x) {
      if (!mv.boundary(x)) continue;
      const int a = mv.grid().labels[x];
      int best_b = -1, best_y = -1;
      double best = -tiny * std::max(1.0, std::abs(e));
      for (int b : detail::neighbor_labels(mv.grid(), x)) {
        if (penalized) {
          const double d = mv.flip_delta(x, b);
          if (d < best) {
            best = d;
            best_b = b;
          }
          continue;
        }
        for (int y = 0; y < init.size(); ++y) {
          if (mv.grid().labels[y] != b || !mv.boundary(y)) continue;
          const double d = mv.swap_delta(x, y);
          if (d < best) {
            const auto ny = detail::neighbor_labels(mv.grid(), y);
            if (!std::binary_search(ny.begin(), ny.end(), a)) continue;
            best = d;
            best_b = b;
            best_y = y;
          }
        }
      }
      if (best_b < 0) continue;
      mv.flip(x, best_b);
      if (best_y >= 0) mv.flip(best_y, a);
      e += best;
      ++moves;
    }
    if (penalized) {
      // best whole-component relabeling, evaluated exactly
      const PixelSet* best_c = nullptr;
      std::vector<PixelSet> comps;
      for (int l = 1; l <= init.num_labels; ++l)
        for (PixelSet& c : decompose(mv.grid(), l).components) comps.push_back(std::move(c));
      int best_b = -1;
      double best_e = e - tiny * std::max(1.0, std::abs(e));
      for (const PixelSet& comp : comps) {
        std::vector<int> around;
        for (int x : comp)
          for (int b : detail::neighbor_labels(mv.grid(), x)) around.push_back(b);
        std::sort(around.begin(), around.end());
        around.erase(std::unique(around.begin(), around.end()), around.end());
        for (int b : around) {
          detail::GridMoves trial = mv;
          for (int x : comp) trial.flip(x, b);
          const double et = trial.energy();
          if (et < best_e) {
            best_e = et;
            best_b = b;
            best_c = &comp;
          }
        }
      }
      if (best_c) {
        for (int x : *best_c) mv.flip(x, best_b);
        ++moves;
      }
    }
    e = mv.energy();
    tr.rows.push_back({sweep, e, mv.residual(), 0.0, static_cast<double>(moves), ""});
    tr.accepted += moves;
    if (moves == 0) {
      tr.status = RunStatus::converged;
      break;
    }
  }
  std::vector<TraceRow> greedy;
  for (const TraceRow& r : tr.rows)
    if (r.event != "anneal") greedy.push_back(r);
  if (!greedy.empty()) greedy.front().event.clear();
  tr.monotone = detail::monotone_rows(greedy);
  run.state = mv.grid();
  return run;
}

}  // namespace perpart
