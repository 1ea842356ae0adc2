#pragma once

#include "perpart/error.hpp"
#include "perpart/functionals.hpp"
#include "perpart/geometry.hpp"
#include "perpart/lattice.hpp"
#include "perpart/model.hpp"

#include <Eigen/Dense>
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace perpart {

/// One use of an edge inside a cell loop.
struct EdgeRef {
  int edge = 0;
  bool forward = true;

  friend bool operator==(const EdgeRef&, const EdgeRef&) = default;
};

/// Polyline from `tail` to `head` translated by the lattice vector `wrap`.
/// Samples are interior points expressed in the frame of the tail vertex.
struct Edge {
  int tail = 0;
  int head = 0;
  Vec2i wrap = Vec2i::Zero();
  std::vector<Vec2> samples;
};

/// A cell is a counter-clockwise loop of edge uses. `shift` is the lattice
/// offset of the loop's starting vertex in the canonical realization of D.
struct Cell {
  int label = 1;
  std::vector<EdgeRef> loop;
  double target = 1.0;
  Vec2i shift = Vec2i::Zero();
};

/// Lattice-periodic polygonal partition of the plane.
struct PolyPartition {
  Lattice lattice = Lattice::square();
  std::vector<Vec2> vertices;
  std::vector<Edge> edges;
  std::vector<Cell> cells;

  int num_cells() const { return static_cast<int>(cells.size()); }
  Vec2 offset(const Vec2i& w) const { return lattice.point(w); }

  std::vector<double> targets() const {
    std::vector<double> v;
    for (const Cell& c : cells) v.push_back(c.target);
    return v;
  }

  int cell_index(int label) const {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].label == label) return static_cast<int>(i);
    throw Error(ErrorKind::invalid_input, "unknown cell label " + std::to_string(label));
  }

  /// Degrees of freedom: vertices first, then the samples of each edge in order.
  int dof_count() const {
    int n = static_cast<int>(vertices.size());
    for (const Edge& e : edges) n += static_cast<int>(e.samples.size());
    return n;
  }

  std::vector<int> sample_base() const {
    std::vector<int> base(edges.size());
    int n = static_cast<int>(vertices.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      base[e] = n;
      n += static_cast<int>(edges[e].samples.size());
    }
    return base;
  }

  Eigen::VectorXd positions() const {
    Eigen::VectorXd x(2 * dof_count());
    int k = 0;
    for (const Vec2& v : vertices) x.segment<2>(2 * k++) = v;
    for (const Edge& e : edges)
      for (const Vec2& s : e.samples) x.segment<2>(2 * k++) = s;
    return x;
  }

  void set_positions(const Eigen::VectorXd& x) {
    require(x.size() == 2 * dof_count(), "set_positions: size mismatch");
    int k = 0;
    for (Vec2& v : vertices) v = x.segment<2>(2 * k++);
    for (Edge& e : edges)
      for (Vec2& s : e.samples) s = x.segment<2>(2 * k++);
  }
};

/// Full polyline of an edge in the tail frame, with the DOF index of each point.
struct Polyline {
  std::vector<Vec2> pts;
  std::vector<int> dof;
};

inline Polyline edge_polyline(const PolyPartition& p, int e) {
  const Edge& ed = p.edges[e];
  Polyline out;
  int base = static_cast<int>(p.vertices.size());
  for (int k = 0; k < e; ++k) base += static_cast<int>(p.edges[k].samples.size());
  out.pts.push_back(p.vertices[ed.tail]);
  out.dof.push_back(ed.tail);
  for (std::size_t k = 0; k < ed.samples.size(); ++k) {
    out.pts.push_back(ed.samples[k]);
    out.dof.push_back(base + static_cast<int>(k));
  }
  out.pts.push_back(p.vertices[ed.head] + p.offset(ed.wrap));
  out.dof.push_back(ed.head);
  return out;
}

/// A cell loop unwrapped into a contiguous planar polygon, plus the lattice
/// offset of the tail of every edge use (needed for the realization of D).
struct CellChain {
  std::vector<Vec2> pts;
  std::vector<int> dof;
  std::vector<Vec2i> tail_offset;  // per loop entry
};

inline CellChain cell_chain(const PolyPartition& p, int ci) {
  const Cell& cell = p.cells[ci];
  const std::vector<int> base = p.sample_base();
  CellChain ch;
  Vec2i o = cell.shift;
  int expect = -1;
  for (const EdgeRef& r : cell.loop) {
    require(r.edge >= 0 && r.edge < static_cast<int>(p.edges.size()), "cell loop: bad edge id");
    const Edge& e = p.edges[r.edge];
    const int start = r.forward ? e.tail : e.head;
    require(expect < 0 || start == expect, "cell loop is not connected (cell label " +
                                               std::to_string(cell.label) + ")");
    if (r.forward) {
      ch.tail_offset.push_back(o);
      const Vec2 off = p.offset(o);
      ch.pts.push_back(p.vertices[e.tail] + off);
      ch.dof.push_back(e.tail);
      for (std::size_t k = 0; k < e.samples.size(); ++k) {
        ch.pts.push_back(e.samples[k] + off);
        ch.dof.push_back(base[r.edge] + static_cast<int>(k));
      }
      o += e.wrap;
      expect = e.head;
    } else {
      const Vec2i to = o - e.wrap;
      ch.tail_offset.push_back(to);
      ch.pts.push_back(p.vertices[e.head] + p.offset(o));
      ch.dof.push_back(e.head);
      const Vec2 off = p.offset(to);
      for (std::size_t k = e.samples.size(); k-- > 0;) {
        ch.pts.push_back(e.samples[k] + off);
        ch.dof.push_back(base[r.edge] + static_cast<int>(k));
      }
      o = to;
      expect = e.tail;
    }
  }
  if (!cell.loop.empty()) {
    const EdgeRef& first = cell.loop.front();
    const int first_vertex = first.forward ? p.edges[first.edge].tail : p.edges[first.edge].head;
    require(expect == first_vertex && o == cell.shift,
            "non-closed loop (cell label " + std::to_string(cell.label) + ")");
  }
  return ch;
}

inline Polygon cell_polygon(const PolyPartition& p, int ci) { return cell_chain(p, ci).pts; }

inline double cell_area_at(const PolyPartition& p, int ci) {
  if (p.cells[ci].loop.empty()) return volume(p.lattice);
  return signed_area(cell_chain(p, ci).pts);
}

inline double cell_area(const PolyPartition& p, int label) { return cell_area_at(p, p.cell_index(label)); }

inline std::vector<double> cell_areas(const PolyPartition& p) {
  std::vector<double> a;
  for (int i = 0; i < p.num_cells(); ++i) a.push_back(cell_area_at(p, i));
  return a;
}

inline double cell_perimeter_at(const PolyPartition& p, int ci, const Anisotropy& a) {
  return anisotropic_perimeter(a, cell_chain(p, ci).pts);
}

inline double cell_perimeter(const PolyPartition& p, int label, const Anisotropy& a) {
  return cell_perimeter_at(p, p.cell_index(label), a);
}

/// Anisotropic length of an edge polyline.
inline double edge_length(const PolyPartition& p, int e, const Anisotropy& a) {
  const Polyline pl = edge_polyline(p, e);
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < pl.pts.size(); ++k) len += a(right_normal(pl.pts[k + 1] - pl.pts[k]));
  return len;
}

/// Edges whose two sides sit in differently-placed copies in the canonical
/// realization of D. Each such edge shows up twice on the boundary of the
/// realization (once per side), so Per(D) is twice their total length.
inline std::vector<bool> domain_boundary_edges(const PolyPartition& p) {
  std::vector<std::vector<std::pair<int, Vec2i>>> uses(p.edges.size());
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    if (p.cells[ci].loop.empty()) continue;
    const CellChain ch = cell_chain(p, ci);
    for (std::size_t k = 0; k < p.cells[ci].loop.size(); ++k)
      uses[p.cells[ci].loop[k].edge].emplace_back(ci, ch.tail_offset[k]);
  }
  std::vector<bool> out(p.edges.size(), false);
  for (std::size_t e = 0; e < p.edges.size(); ++e)
    if (uses[e].size() == 2) out[e] = uses[e][0].second != uses[e][1].second;
  return out;
}

inline double domain_perimeter(const PolyPartition& p, const Anisotropy& a) {
  const auto bd = domain_boundary_edges(p);
  double sum = 0.0;
  for (std::size_t e = 0; e < p.edges.size(); ++e)
    if (bd[e]) sum += edge_length(p, static_cast<int>(e), a);
  return 2.0 * sum;
}

/// Total length of the periodic skeleton (each edge once).
inline double interface_length(const PolyPartition& p, const Anisotropy& a) {
  double sum = 0.0;
  for (std::size_t e = 0; e < p.edges.size(); ++e) sum += edge_length(p, static_cast<int>(e), a);
  return sum;
}

/// Structural checks: every edge used once in each direction, closed loops,
/// non-degenerate cells, areas summing to the lattice volume, no
/// topological vertex of degree < 3.
inline void validate(const PolyPartition& p) {
  require(p.lattice.dim() == 2, "polygonal partitions are planar");
  require(!p.cells.empty(), "partition has no cells");
  std::vector<int> fwd(p.edges.size(), 0), bwd(p.edges.size(), 0);
  for (const Cell& c : p.cells) {
    require(!c.loop.empty() || p.cells.size() == 1, "empty loop in a multi-cell partition");
    for (const EdgeRef& r : c.loop) {
      require(r.edge >= 0 && r.edge < static_cast<int>(p.edges.size()), "cell loop: bad edge id");
      (r.forward ? fwd : bwd)[r.edge]++;
    }
  }
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    require(p.edges[e].tail >= 0 && p.edges[e].tail < static_cast<int>(p.vertices.size()) &&
                p.edges[e].head >= 0 && p.edges[e].head < static_cast<int>(p.vertices.size()),
            "edge references a missing vertex");
    require(fwd[e] == 1 && bwd[e] == 1,
            "edge " + std::to_string(e) + " must be used exactly once in each direction");
  }
  std::vector<int> degree(p.vertices.size(), 0);
  for (const Edge& e : p.edges) {
    degree[e.tail]++;
    degree[e.head]++;
  }
  for (std::size_t v = 0; v < p.vertices.size(); ++v)
    require(degree[v] >= 3, "vertex " + std::to_string(v) + " has degree < 3");

  double total = 0.0, target = 0.0;
  std::vector<int> labels;
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    const double a = cell_area_at(p, ci);
    require(a > 1e-8, "degenerate cell (label " + std::to_string(p.cells[ci].label) + ")");
    require(p.cells[ci].target > 0.0, "cell target volume must be positive");
    total += a;
    target += p.cells[ci].target;
    labels.push_back(p.cells[ci].label);
  }
  std::sort(labels.begin(), labels.end());
  require(std::adjacent_find(labels.begin(), labels.end()) == labels.end(), "duplicate cell labels");
  const double vol = volume(p.lattice);
  require(std::abs(total - vol) <= 1e-9 * std::max(1.0, vol), "cell areas do not sum to the lattice volume");
  require(std::abs(target - vol) <= 1e-9 * std::max(1.0, vol),
          "target volumes do not sum to the lattice volume");
}

/// mu Per(D) + 1/2 sum Per(E_i) [+ lambda sum ||E_i| - v_i|] for local models.
inline EnergyBreakdown total_energy(const PolyPartition& p, const EnergyModel& model) {
  require(model.is_local(), "total_energy: non-local models need a grid representation",
          ErrorKind::unsupported);
  require(model.volumes.size() == p.cells.size(), "energy model volume count != cell count");
  const Anisotropy& phi = model.norm();
  EnergyBreakdown b;
  double half = 0.0;
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    CellEnergy ce;
    if (p.cells[ci].loop.empty()) {
      ce.area = volume(p.lattice);
    } else {
      const CellChain ch = cell_chain(p, ci);
      ce.area = signed_area(ch.pts);
      ce.perimeter = anisotropic_perimeter(phi, ch.pts);
    }
    const double dev = std::abs(ce.area - model.volumes[ci]);
    if (model.mode == VolumeMode::penalized) ce.penalty = model.lambda * dev;
    b.volume_residual = std::max(b.volume_residual, dev);
    half += ce.perimeter;
    b.penalty_term += ce.penalty;
    b.per_cell.push_back(ce);
  }
  b.half_sum_perimeters = 0.5 * half;
  b.mu_term = model.mu > 0.0 ? model.mu * domain_perimeter(p, phi) : 0.0;
  b.total = b.mu_term + b.half_sum_perimeters + b.penalty_term;
  return b;
}

/// For every edge, the cell using it forward (on its left) and the cell
/// using it backward (on its right); -1 when missing.
inline std::vector<std::pair<int, int>> edge_cells(const PolyPartition& p) {
  std::vector<std::pair<int, int>> out(p.edges.size(), {-1, -1});
  for (int ci = 0; ci < p.num_cells(); ++ci)
    for (const EdgeRef& r : p.cells[ci].loop) (r.forward ? out[r.edge].first : out[r.edge].second) = ci;
  return out;
}

/// A (vertex, edge) incidence. `at_tail` tells which end of the edge sits at the vertex.
struct EdgeEnd {
  int edge = 0;
  bool at_tail = true;

  friend bool operator==(const EdgeEnd&, const EdgeEnd&) = default;
};

/// Unit direction leaving the vertex along the first polyline segment.
inline Vec2 end_tangent(const PolyPartition& p, const EdgeEnd& end) {
  const Polyline pl = edge_polyline(p, end.edge);
  const std::size_t n = pl.pts.size();
  const Vec2 t = end.at_tail ? Vec2(pl.pts[1] - pl.pts[0]) : Vec2(pl.pts[n - 2] - pl.pts[n - 1]);
  return t.normalized();
}

inline std::vector<std::vector<EdgeEnd>> vertex_incidence(const PolyPartition& p) {
  std::vector<std::vector<EdgeEnd>> inc(p.vertices.size());
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    inc[p.edges[e].tail].push_back({static_cast<int>(e), true});
    inc[p.edges[e].head].push_back({static_cast<int>(e), false});
  }
  return inc;
}

struct Junction {
  int vertex = 0;
  std::vector<EdgeEnd> ends;
  std::vector<Vec2> tangents;
};

/// All topological vertices (degree >= 3) with their outgoing unit tangents.
inline std::vector<Junction> junction_list(const PolyPartition& p) {
  std::vector<Junction> out;
  const auto inc = vertex_incidence(p);
  for (std::size_t v = 0; v < inc.size(); ++v) {
    if (inc[v].size() < 3) continue;
    Junction j{static_cast<int>(v), inc[v], {}};
    for (const EdgeEnd& end : inc[v]) j.tangents.push_back(end_tangent(p, end));
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builders.

/// A polygon corner given as a vertex id plus the lattice offset of the copy
/// that the polygon touches.
struct Corner {
  int vertex = 0;
  Vec2i offset = Vec2i::Zero();
};

/// Straight interior samples of the segment a -> b.
inline std::vector<Vec2> straight_samples(const Vec2& a, const Vec2& b, int samples) {
  std::vector<Vec2> out;
  for (int k = 1; k <= samples; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / (samples + 1)));
  return out;
}

/// Build a partition from counter-clockwise corner lists. Consecutive corners
/// define edges; an edge met again in the opposite direction is shared.
/// Labels are 1..N in the given order.
inline PolyPartition build_from_corners(const Lattice& lat, std::vector<Vec2> vertices,
                                        const std::vector<std::vector<Corner>>& cells,
                                        const std::vector<double>& targets, int samples) {
  require(samples >= 0, "sample count must be >= 0");
  require(cells.size() == targets.size(), "one target volume per cell required");
  PolyPartition p{lat, std::move(vertices), {}, {}};
  std::map<std::tuple<int, int, int, int>, int> by_key;
  std::vector<bool> reversed_used;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const auto& cs = cells[ci];
    require(cs.size() >= 2, "cell needs at least two corners");
    Cell cell;
    cell.label = static_cast<int>(ci) + 1;
    cell.target = targets[ci];
    cell.shift = cs.front().offset;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const Corner& a = cs[k];
      const Corner& b = cs[(k + 1) % cs.size()];
      const Vec2i w = b.offset - a.offset;
      const auto rev = by_key.find({b.vertex, a.vertex, -w.x(), -w.y()});
      if (rev != by_key.end() && !reversed_used[rev->second]) {
        reversed_used[rev->second] = true;
        cell.loop.push_back({rev->second, false});
        continue;
      }
      require(!by_key.count({a.vertex, b.vertex, w.x(), w.y()}), "edge used twice in the same direction");
      const int id = static_cast<int>(p.edges.size());
      const Vec2 pa = p.vertices[a.vertex];
      const Vec2 pb = p.vertices[b.vertex] + lat.point(w);
      p.edges.push_back({a.vertex, b.vertex, w, straight_samples(pa, pb, samples)});
      reversed_used.push_back(false);
      by_key[{a.vertex, b.vertex, w.x(), w.y()}] = id;
      cell.loop.push_back({id, true});
    }
    p.cells.push_back(std::move(cell));
  }
  return p;
}

/// Build a partition from counter-clockwise planar polygons forming one
/// fundamental realization. Points equal modulo the lattice (within `tol`)
/// become one vertex; vertices lying inside another polygon's side are
/// inserted there (T-junctions).
inline PolyPartition build_from_polygons(const Lattice& lat, const std::vector<Polygon>& polys,
                                         const std::vector<double>& targets, int samples,
                                         double tol = -1.0) {
  if (tol < 0.0) tol = 1e-9 * std::sqrt(volume(lat));
  std::vector<Vec2> reps;
  auto find_rep = [&](const Vec2& x) -> Corner {
    for (std::size_t r = 0; r < reps.size(); ++r) {
      const Eigen::VectorXd f = lat.fractional(x - reps[r]);
      const Vec2i g(static_cast<int>(std::lround(f(0))), static_cast<int>(std::lround(f(1))));
      if ((x - reps[r] - lat.point(g)).norm() <= tol) return {static_cast<int>(r), g};
    }
    reps.push_back(x);
    return {static_cast<int>(reps.size()) - 1, Vec2i::Zero()};
  };
  std::vector<std::vector<Corner>> corners(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) {
    require(polys[i].size() >= 3 && signed_area(polys[i]) > 0.0, "polygons must be counter-clockwise");
    for (const Vec2& x : polys[i]) corners[i].push_back(find_rep(x));
  }
  // T-junctions.
  for (std::size_t i = 0; i < polys.size(); ++i) {
    std::vector<Corner> out;
    const auto& poly = polys[i];
    for (std::size_t k = 0; k < poly.size(); ++k) {
      out.push_back(corners[i][k]);
      const Vec2 a = poly[k], b = poly[(k + 1) % poly.size()];
      const Vec2 d = b - a;
      const double len2 = d.squaredNorm();
      std::vector<std::pair<double, Corner>> hits;
      for (std::size_t r = 0; r < reps.size(); ++r) {
        const Eigen::VectorXd fa = lat.fractional(a - reps[r]), fb = lat.fractional(b - reps[r]);
        const int x0 = static_cast<int>(std::floor(std::min(fa(0), fb(0)))) - 1;
        const int x1 = static_cast<int>(std::ceil(std::max(fa(0), fb(0)))) + 1;
        const int y0 = static_cast<int>(std::floor(std::min(fa(1), fb(1)))) - 1;
        const int y1 = static_cast<int>(std::ceil(std::max(fa(1), fb(1)))) + 1;
        for (int gx = x0; gx <= x1; ++gx)
          for (int gy = y0; gy <= y1; ++gy) {
            const Vec2 q = reps[r] + lat.point(Vec2i(gx, gy));
            const double t = (q - a).dot(d) / len2;
            if (t * std::sqrt(len2) <= tol || (1.0 - t) * std::sqrt(len2) <= tol) continue;
            if ((a + t * d - q).norm() <= tol) hits.emplace_back(t, Corner{static_cast<int>(r), Vec2i(gx, gy)});
          }
      }
      std::sort(hits.begin(), hits.end(), [](const auto& u, const auto& v) { return u.first < v.first; });
      for (const auto& h : hits) out.push_back(h.second);
    }
    corners[i] = std::move(out);
  }
  return build_from_corners(lat, reps, corners, targets, samples);
}

// ---------------------------------------------------------------------------
// Area gradients and local modifications.

/// Gradient of every cell area with respect to the flattened DOF vector.
inline Eigen::MatrixXd area_jacobian(const PolyPartition& p) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p.num_cells(), 2 * p.dof_count());
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    if (p.cells[ci].loop.empty()) continue;
    const CellChain ch = cell_chain(p, ci);
    const std::size_t n = ch.pts.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& prev = ch.pts[(k + n - 1) % n];
      const Vec2& next = ch.pts[(k + 1) % n];
      jac(ci, 2 * ch.dof[k]) += 0.5 * (next.y() - prev.y());
      jac(ci, 2 * ch.dof[k] + 1) += 0.5 * (prev.x() - next.x());
    }
  }
  return jac;
}

struct Ball {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

/// The lattice translate of x closest to `c` (searched around the rounded
/// fractional offset).
inline Vec2 nearest_translate(const Lattice& lat, const Vec2& x, const Vec2& c) {
  const Eigen::VectorXd f = lat.fractional(c - x);
  const Vec2i k0(static_cast<int>(std::lround(f(0))), static_cast<int>(std::lround(f(1))));
  Vec2 best = x + lat.point(k0);
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      const Vec2 y = x + lat.point(k0 + Vec2i(i, j));
      if ((y - c).norm() < (best - c).norm()) best = y;
    }
  return best;
}

/// Mask of DOFs with a lattice translate strictly inside the ball.
inline std::vector<bool> dofs_in_ball(const PolyPartition& p, const Ball& ball) {
  const Eigen::VectorXd x = p.positions();
  std::vector<bool> in(p.dof_count(), false);
  for (int k = 0; k < p.dof_count(); ++k) {
    const Vec2 y = nearest_translate(p.lattice, x.segment<2>(2 * k), ball.center);
    in[k] = (y - ball.center).norm() < ball.radius;
  }
  return in;
}

/// Restore the given cell areas by a minimum-norm displacement of the
/// movable DOFs only (Gauss-Newton on the area map).
inline void restore_areas(PolyPartition& p, const std::vector<double>& target,
                          const std::vector<bool>& movable, double tol = 1e-12, int max_iter = 50) {
  std::vector<int> idx;
  for (int k = 0; k < p.dof_count(); ++k)
    if (movable[k]) idx.push_back(k);
  for (int it = 0; it <= max_iter; ++it) {
    const auto areas = cell_areas(p);
    Eigen::VectorXd res(p.num_cells());
    for (int i = 0; i < p.num_cells(); ++i) res(i) = areas[i] - target[i];
    if (res.cwiseAbs().maxCoeff() <= tol) return;
    require(it < max_iter && !idx.empty(), "volume correction infeasible",
            ErrorKind::numerical_failure);
    const Eigen::MatrixXd full = area_jacobian(p);
    Eigen::MatrixXd jac(p.num_cells(), 2 * idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      jac.col(2 * k) = full.col(2 * idx[k]);
      jac.col(2 * k + 1) = full.col(2 * idx[k] + 1);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);  // must precede compute()
    cod.compute(jac);
    const Eigen::VectorXd step = cod.solve(res);
    require(step.allFinite(), "volume correction infeasible", ErrorKind::numerical_failure);
    // Unreachable targets leave a residual in the range complement.
    require((jac * step - res).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + res.cwiseAbs().maxCoeff()),
            "volume correction infeasible", ErrorKind::numerical_failure);
    Eigen::VectorXd x = p.positions();
    for (std::size_t k = 0; k < idx.size(); ++k) x.segment<2>(2 * idx[k]) -= step.segment<2>(2 * k);
    p.set_positions(x);
  }
}

/// Apply a displacement supported strictly inside a ball of radius < rho_G/2,
/// optionally followed by an area-restoring correction that also stays inside
/// the ball.
inline PolyPartition local_perturbation(const PolyPartition& p, const Ball& ball,
                                        const std::vector<Vec2>& displacement, bool volume_preserving) {
  require(ball.radius > 0.0 && ball.radius < packing_radius(p.lattice) / 2.0,
          "local_perturbation: radius must be < rho_G/2");
  require(static_cast<int>(displacement.size()) == p.dof_count(),
          "local_perturbation: displacement size mismatch");
  const std::vector<bool> in = dofs_in_ball(p, ball);
  for (int k = 0; k < p.dof_count(); ++k)
    require(in[k] || displacement[k].norm() == 0.0, "local_perturbation: support violation");

  const std::vector<double> before = cell_areas(p);
  PolyPartition q = p;
  Eigen::VectorXd x = q.positions();
  for (int k = 0; k < q.dof_count(); ++k) x.segment<2>(2 * k) += displacement[k];
  q.set_positions(x);
  if (volume_preserving) restore_areas(q, before, in);
  return q;
}

// ---------------------------------------------------------------------------
// Polygon overlays (Boost.Geometry).

namespace bg_detail {
using point = boost::geometry::model::d2::point_xy<double>;
using polygon = boost::geometry::model::polygon<point, false>;  // counter-clockwise
using multi = boost::geometry::model::multi_polygon<polygon>;

inline polygon to_bg(std::span<const Vec2> poly) {
  polygon out;
  for (const Vec2& v : poly) out.outer().emplace_back(v.x(), v.y());
  if (!poly.empty()) out.outer().emplace_back(poly[0].x(), poly[0].y());
  boost::geometry::correct(out);
  return out;
}
}  // namespace bg_detail

inline double intersection_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  bg_detail::multi out;
  boost::geometry::intersection(bg_detail::to_bg(a), bg_detail::to_bg(b), out);
  return boost::geometry::area(out);
}

inline double symmetric_difference_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  bg_detail::multi out;
  boost::geometry::sym_difference(bg_detail::to_bg(a), bg_detail::to_bg(b), out);
  return boost::geometry::area(out);
}

/// sum_i |E_i (symmetric difference) F_i| for two states with the same cells.
inline double symmetric_difference_area(const PolyPartition& a, const PolyPartition& b) {
  require(a.num_cells() == b.num_cells(), "symmetric difference: cell count mismatch");
  double sum = 0.0;
  for (int ci = 0; ci < a.num_cells(); ++ci)
    sum += symmetric_difference_area(cell_polygon(a, ci), cell_polygon(b, ci));
  return sum;
}

}  // namespace perpart
