#pragma once

#include "perpart/error.hpp"
#include "perpart/functionals.hpp"
#include "perpart/geometry.hpp"
#include "perpart/lattice.hpp"
#include "perpart/poly_partition.hpp"

#include <boost/geometry/algorithms/convex_hull.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace perpart {

/// Pixel indices into a GridPartition, p = j * n + i.
using PixelSet = std::vector<int>;

/// Label field on the fundamental parallelepiped. Pixel (i, j) is the image of
/// [i/n, (i+1)/n) x [j/n, (j+1)/n) under the basis map; labels are 1..N and
/// stored row-major (rows run along e1).
struct GridPartition {
  Lattice lattice = Lattice::square();
  int n = 1;
  int num_labels = 1;
  std::vector<int> labels;

  GridPartition() : labels(1, 1) {}
  GridPartition(Lattice lat, int res, int nl, std::vector<int> lab)
      : lattice(std::move(lat)), n(res), num_labels(nl), labels(std::move(lab)) {}

  /// Uniform grid with every pixel carrying `label`.
  static GridPartition filled(Lattice lat, int res, int nl, int label = 1) {
    return {std::move(lat), res, nl, std::vector<int>(static_cast<std::size_t>(res) * res, label)};
  }

  int size() const { return n * n; }
  int index(int i, int j) const { return wrap(j) * n + wrap(i); }
  int wrap(int i) const { return ((i % n) + n) % n; }
  int col(int p) const { return p % n; }
  int row(int p) const { return p / n; }
  int& at(int i, int j) { return labels[index(i, j)]; }
  int at(int i, int j) const { return labels[index(i, j)]; }

  double pixel_volume() const { return volume(lattice) / (static_cast<double>(n) * n); }

  /// Cartesian position of lattice-fractional coordinates (u, v) / n.
  Vec2 point(double u, double v) const { return (lattice.e(0) * u + lattice.e(1) * v) / n; }
  Vec2 center(int p) const { return point(col(p) + 0.5, row(p) + 0.5); }

  /// Side lengths of the faces crossed by steps along e1 and along e2.
  double face_e1() const { return lattice.e(1).norm() / n; }
  double face_e2() const { return lattice.e(0).norm() / n; }

  int count(int label) const { return static_cast<int>(std::count(labels.begin(), labels.end(), label)); }
  double label_volume(int label) const { return count(label) * pixel_volume(); }

  PixelSet pixels(int label) const {
    PixelSet out;
    for (int p = 0; p < size(); ++p)
      if (labels[p] == label) out.push_back(p);
    return out;
  }

  /// 4-neighbors of p on the torus: +e1, -e1, +e2, -e2.
  std::array<int, 4> neighbors4(int p) const {
    const int i = col(p), j = row(p);
    return {index(i + 1, j), index(i - 1, j), index(i, j + 1), index(i, j - 1)};
  }

  std::array<int, 8> neighbors8(int p) const {
    const int i = col(p), j = row(p);
    return {index(i + 1, j), index(i - 1, j), index(i, j + 1), index(i, j - 1),
            index(i + 1, j + 1), index(i - 1, j + 1), index(i + 1, j - 1), index(i - 1, j - 1)};
  }
};

inline void validate(const GridPartition& g) {
  require(g.lattice.dim() == 2, "grid partitions are planar", ErrorKind::unsupported);
  require(g.n >= 1, "grid resolution must be >= 1");
  require(g.num_labels >= 1, "grid needs at least one label");
  require(static_cast<int>(g.labels.size()) == g.n * g.n, "grid label count != n^2");
  for (int l : g.labels) require(l >= 1 && l <= g.num_labels, "grid label out of range");
}

inline void require_label(const GridPartition& g, int label) {
  require(label >= 1 && label <= g.num_labels, "unknown grid label " + std::to_string(label));
}

/// Pixel membership mask of a set.
inline std::vector<char> mask_of(const GridPartition& g, const PixelSet& s) {
  std::vector<char> m(g.size(), 0);
  for (int p : s) m[p] = 1;
  return m;
}

/// Anisotropic length of the faces between the set and its complement.
inline double set_perimeter(const GridPartition& g, const std::vector<char>& in,
                            const Anisotropy& a = Anisotropy::euclidean()) {
  // steps along e1 cross a face parallel to e2, and vice versa
  const double w1 = a(right_normal(g.lattice.e(1) / g.n));
  const double w2 = a(right_normal(g.lattice.e(0) / g.n));
  long c1 = 0, c2 = 0;
  for (int p = 0; p < g.size(); ++p) {
    const int i = g.col(p), j = g.row(p);
    if (in[p] != in[g.index(i + 1, j)]) ++c1;
    if (in[p] != in[g.index(i, j + 1)]) ++c2;
  }
  return c1 * w1 + c2 * w2;
}

inline double grid_perimeter(const GridPartition& g, int label, const Anisotropy& a = Anisotropy::euclidean()) {
  require_label(g, label);
  std::vector<char> in(g.size());
  for (int p = 0; p < g.size(); ++p) in[p] = g.labels[p] == label;
  return set_perimeter(g, in, a);
}

inline double sum_perimeters(const GridPartition& g, const Anisotropy& a = Anisotropy::euclidean()) {
  double s = 0.0;
  for (int l = 1; l <= g.num_labels; ++l) s += grid_perimeter(g, l, a);
  return s;
}

// ---------------------------------------------------------------------------
// Non-local perimeter.

inline double cell_diameter(const Lattice& lat) { return diameter(fundamental_parallelepiped(lat).polygon()); }

/// Periodized kernel sum_{|g| <= R} K(x + g) for every pixel offset
/// (di, dj) in (-n, n)^2, stored at (di + n - 1) * (2n - 1) + (dj + n - 1).
/// The zero vector is skipped.
class PeriodizedKernel {
 public:
  PeriodizedKernel(const GridPartition& g, const Kernel& k, double radius) : n_(g.n), w_(2 * g.n - 1) {
    const Lattice& lat = g.lattice;
    const Eigen::Matrix2d inv = lat.basis().inverse();
    const int b0 = static_cast<int>(std::ceil(radius * inv.row(0).norm())) + 1;
    const int b1 = static_cast<int>(std::ceil(radius * inv.row(1).norm())) + 1;
    std::vector<Vec2> gs;
    for (int a = -b0; a <= b0; ++a)
      for (int b = -b1; b <= b1; ++b) {
        const Vec2 v = lat.point(Vec2i(a, b));
        if (k.within(v.squaredNorm(), radius)) gs.push_back(v);
      }
    table_.assign(static_cast<std::size_t>(w_) * w_, 0.0);
    for (int di = -(n_ - 1); di < n_; ++di)
      for (int dj = -(n_ - 1); dj < n_; ++dj) {
        if (std::make_pair(di, dj) < std::make_pair(0, 0)) continue;
        const Vec2 x = g.point(di, dj);
        std::vector<double> terms;
        terms.reserve(gs.size());
        for (const Vec2& v : gs) {
          const double r = (x + v).norm();
          if (r > 0.0) terms.push_back(k(r));
        }
        const double t = pairwise_sum(terms);
        table_[slot(di, dj)] = t;
        table_[slot(-di, -dj)] = t;
      }
  }

  double operator()(int di, int dj) const { return table_[slot(di, dj)]; }

 private:
  std::size_t slot(int di, int dj) const {
    return static_cast<std::size_t>(di + n_ - 1) * w_ + static_cast<std::size_t>(dj + n_ - 1);
  }
  int n_, w_;
  std::vector<double> table_;
};

/// Resolved truncation radius: the kernel's own if positive, else 6 diam(cell).
inline double truncation_radius(const GridPartition& g, const Kernel& k) {
  const double diam = cell_diameter(g.lattice);
  const double r = k.truncation_radius > 0.0 ? k.truncation_radius : 6.0 * diam;
  require(r >= diam, "non-local perimeter: truncation radius smaller than the cell diameter");
  return r;
}

struct NonlocalPerimeter {
  double value = 0.0;
  double tail_bound = 0.0;               // |E| * tail(R - diam)
  double discretization_estimate = 0.0;  // same-face pixel pairs, reported only
  double radius = 0.0;
};

/// Midpoint-rule double sum of the periodized kernel over (E, complement)
/// pixel pairs, times the squared pixel volume.
inline double nonlocal_sum(const GridPartition& g, const std::vector<char>& in, const PeriodizedKernel& kp) {
  std::vector<double> rows;
  rows.reserve(g.size());
  std::vector<double> terms(g.size());
  for (int x = 0; x < g.size(); ++x) {
    if (!in[x]) continue;
    int m = 0;
    for (int y = 0; y < g.size(); ++y)
      if (!in[y]) terms[m++] = kp(g.col(x) - g.col(y), g.row(x) - g.row(y));
    rows.push_back(pairwise_sum(std::span<const double>(terms.data(), m)));
  }
  const double pv = g.pixel_volume();
  return pairwise_sum(rows) * pv * pv;
}

inline NonlocalPerimeter nonlocal_perimeter(const GridPartition& g, int label, const Kernel& k) {
  validate(g);
  require_label(g, label);
  k.validate();
  require(k.dim == 2, "non-local perimeter on grids is planar", ErrorKind::unsupported);
  NonlocalPerimeter out;
  out.radius = truncation_radius(g, k);
  std::vector<char> in(g.size());
  for (int p = 0; p < g.size(); ++p) in[p] = g.labels[p] == label;
  const int cnt = static_cast<int>(std::count(in.begin(), in.end(), 1));
  if (cnt == 0 || cnt == g.size()) return out;
  const PeriodizedKernel kp(g, k, out.radius);
  out.value = nonlocal_sum(g, in, kp);
  const double diam = cell_diameter(g.lattice);
  out.tail_bound = out.radius > diam ? cnt * g.pixel_volume() * kernel_tail(k, out.radius - diam) : INFINITY;
  // each face pair is approximated by the midpoint value at one pixel side
  const double h = std::sqrt(g.pixel_volume());
  const double faces = set_perimeter(g, in) / h;
  out.discretization_estimate = faces * std::abs(adjacent_square_interaction(k.s) - 1.0) * std::pow(h, 2.0 - k.s);
  return out;
}

// ---------------------------------------------------------------------------
// Components, saturation and the merge surgery.

struct ComponentDecomposition {
  int label = 0;
  std::vector<PixelSet> components;  // non-increasing size

  int count() const { return static_cast<int>(components.size()); }
};

namespace detail {

/// Connected components of the masked pixels; `eight` selects 8-connectivity.
/// Each component is sorted; components come ordered by decreasing size,
/// ties by smallest pixel index.
inline std::vector<PixelSet> components(const GridPartition& g, const std::vector<char>& in, bool eight) {
  std::vector<int> seen(g.size(), 0);
  std::vector<PixelSet> out;
  for (int s = 0; s < g.size(); ++s) {
    if (!in[s] || seen[s]) continue;
    PixelSet comp;
    std::deque<int> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      comp.push_back(p);
      auto visit = [&](int q) {
        if (in[q] && !seen[q]) {
          seen[q] = 1;
          queue.push_back(q);
        }
      };
      if (eight) {
        for (int q : g.neighbors8(p)) visit(q);
      } else {
        for (int q : g.neighbors4(p)) visit(q);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::stable_sort(out.begin(), out.end(), [](const PixelSet& a, const PixelSet& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return out;
}

}  // namespace detail

/// 4-connected components of a label on the torus.
inline ComponentDecomposition decompose(const GridPartition& g, int label) {
  require_label(g, label);
  std::vector<char> in(g.size());
  for (int p = 0; p < g.size(); ++p) in[p] = g.labels[p] == label;
  return {label, detail::components(g, in, false)};
}

/// The component plus its holes: every 8-connected complement component
/// except the largest one, which plays the role of the outside.
inline PixelSet saturate(const GridPartition& g, const PixelSet& component) {
  require(!component.empty(), "saturate: empty component");
  std::vector<char> out = mask_of(g, component);
  for (char& c : out) c = !c;
  const auto holes = detail::components(g, out, true);
  require(!holes.empty(), "saturate: component covers the whole torus");
  PixelSet sat = component;
  for (std::size_t h = 1; h < holes.size(); ++h) sat.insert(sat.end(), holes[h].begin(), holes[h].end());
  std::sort(sat.begin(), sat.end());
  return sat;
}

/// Indecomposable and saturated. An absent label counts as simple.
inline bool is_simple(const GridPartition& g, int label) {
  const ComponentDecomposition d = decompose(g, label);
  if (d.count() == 0) return true;
  if (d.count() > 1) return false;
  if (static_cast<int>(d.components[0].size()) == g.size()) return true;
  return saturate(g, d.components[0]).size() == d.components[0].size();
}

inline bool all_simple(const GridPartition& g) {
  for (int l = 1; l <= g.num_labels; ++l)
    if (!is_simple(g, l)) return false;
  return true;
}

enum class MergeStatus { applied, all_simple, no_candidate };

struct MergeResult {
  GridPartition grid;
  bool applied = false;
  MergeStatus status = MergeStatus::all_simple;
  int into = 0, from = 0, component = 0;  // label i, label j, index k (0-based, > 0)
  double shared_length = 0.0;              // interface between E_{i,1} and E_{j,k}
  double delta_sum_perimeters = 0.0;
};

/// One merge step: a secondary component E_{j,k} (k > 1) sharing at least one
/// face with a primary component E_{i,1} is relabeled i. Among admissible
/// candidates the longest shared interface wins, ties by (i, j, k). Label i
/// is admissible only if, when E_{i,1} has holes, no other primary component
/// lies inside sat(E_{i,1}).
inline MergeResult merge_step(const GridPartition& g) {
  validate(g);
  MergeResult res{g};
  if (all_simple(g)) return res;

  std::vector<ComponentDecomposition> dec;
  for (int l = 1; l <= g.num_labels; ++l) dec.push_back(decompose(g, l));
  std::vector<char> admissible(g.num_labels + 1, 1);
  for (int i = 1; i <= g.num_labels; ++i) {
    const auto& d = dec[i - 1];
    if (d.count() == 0 || static_cast<int>(d.components[0].size()) == g.size()) continue;
    const PixelSet sat = saturate(g, d.components[0]);
    if (sat.size() == d.components[0].size()) continue;
    const std::vector<char> in = mask_of(g, sat);
    for (int j = 1; j <= g.num_labels && admissible[i]; ++j) {
      if (j == i || dec[j - 1].count() == 0) continue;
      for (int p : dec[j - 1].components[0])
        if (in[p]) {
          admissible[i] = 0;
          break;
        }
    }
  }

  // component id of every pixel: (label, k)
  std::vector<int> comp_of(g.size(), -1);
  for (const auto& d : dec)
    for (int k = 0; k < d.count(); ++k)
      for (int p : d.components[k]) comp_of[p] = k;

  double best = 0.0;
  int bi = 0, bj = 0, bk = 0;
  for (int j = 1; j <= g.num_labels; ++j)
    for (int k = 1; k < dec[j - 1].count(); ++k) {
      // faces from E_{j,k} to each primary component
      std::vector<long> faces(g.num_labels + 1, 0);
      for (int p : dec[j - 1].components[k])
        for (int q : g.neighbors4(p)) {
          const int i = g.labels[q];
          if (i != j && comp_of[q] == 0) ++faces[i];
        }
      for (int i = 1; i <= g.num_labels; ++i) {
        if (i == j || !admissible[i] || faces[i] == 0) continue;
        // lengths differ per direction on non-square pixels, so measure exactly
        const std::vector<char> a = mask_of(g, dec[i - 1].components[0]);
        double len = 0.0;
        for (int p : dec[j - 1].components[k]) {
          const int ci = g.col(p), cj = g.row(p);
          if (a[g.index(ci + 1, cj)]) len += g.face_e1();
          if (a[g.index(ci - 1, cj)]) len += g.face_e1();
          if (a[g.index(ci, cj + 1)]) len += g.face_e2();
          if (a[g.index(ci, cj - 1)]) len += g.face_e2();
        }
        if (len > best * (1.0 + 1e-12)) {
          best = len;
          bi = i, bj = j, bk = k;
        }
      }
    }
  if (bi == 0) {
    res.status = MergeStatus::no_candidate;
    return res;
  }
  const double before = sum_perimeters(g);
  for (int p : dec[bj - 1].components[bk]) res.grid.labels[p] = bi;
  res.applied = true;
  res.status = MergeStatus::applied;
  res.into = bi, res.from = bj, res.component = bk;
  res.shared_length = best;
  res.delta_sum_perimeters = sum_perimeters(res.grid) - before;
  return res;
}

// ---------------------------------------------------------------------------
// Diameter bounds and Hausdorff distance.

struct ComponentDiameter {
  int label = 0;
  double diameter = 0.0;   // infinite for components that wrap around the torus
  double perimeter = 0.0;
  double ratio = 0.0;      // diameter / perimeter
  bool flagged = false;    // ratio > 1/2
};

/// Pixel corners of a component unwrapped into the plane by a breadth-first
/// walk. Returns false when the component wraps around the torus.
inline bool unwrap_component(const GridPartition& g, const PixelSet& comp, std::vector<Vec2>& corners) {
  std::vector<char> in = mask_of(g, comp);
  std::vector<Vec2i> pos(g.size(), Vec2i::Zero());
  std::vector<char> seen(g.size(), 0);
  std::deque<int> queue{comp.front()};
  seen[comp.front()] = 1;
  pos[comp.front()] = Vec2i(g.col(comp.front()), g.row(comp.front()));
  const Vec2i step[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  bool ok = true;
  while (!queue.empty()) {
    const int p = queue.front();
    queue.pop_front();
    const auto nb = g.neighbors4(p);
    for (int d = 0; d < 4; ++d) {
      const int q = nb[d];
      if (!in[q]) continue;
      const Vec2i u = pos[p] + step[d];
      if (!seen[q]) {
        seen[q] = 1;
        pos[q] = u;
        queue.push_back(q);
      } else if (pos[q] != u) {
        ok = false;
      }
    }
  }
  corners.clear();
  for (int p : comp)
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b) corners.push_back(g.point(pos[p].x() + a, pos[p].y() + b));
  return ok;
}

inline double hull_diameter(const std::vector<Vec2>& pts) {
  using bg_detail::point;
  boost::geometry::model::multi_point<point> mp;
  for (const Vec2& v : pts) mp.emplace_back(v.x(), v.y());
  boost::geometry::model::ring<point> hull;
  boost::geometry::convex_hull(mp, hull);
  std::vector<Vec2> h;
  for (const point& q : hull) h.emplace_back(q.x(), q.y());
  return diameter(h);
}

inline std::vector<ComponentDiameter> diameter_check(const GridPartition& g, int label) {
  require_label(g, label);
  std::vector<ComponentDiameter> out;
  for (const PixelSet& comp : decompose(g, label).components) {
    ComponentDiameter c{label};
    std::vector<Vec2> corners;
    c.diameter = unwrap_component(g, comp, corners) ? hull_diameter(corners) : INFINITY;
    c.perimeter = set_perimeter(g, mask_of(g, comp));
    c.ratio = c.perimeter > 0.0 ? c.diameter / c.perimeter : INFINITY;
    c.flagged = c.ratio > 0.5;
    out.push_back(c);
  }
  return out;
}

/// Distance on the torus R^2 / G.
inline double torus_distance(const Lattice& lat, const Vec2& x, const Vec2& y) {
  return (nearest_translate(lat, x, y) - y).norm();
}

/// Pixels whose center lies in some lattice translate of the polygon.
inline PixelSet rasterize(const GridPartition& g, const Polygon& poly) {
  require(poly.size() >= 3, "rasterize: polygon needs three corners");
  Vec2 c = Vec2::Zero();
  for (const Vec2& v : poly) c += v;
  c /= static_cast<double>(poly.size());
  const double reach = diameter(poly) + cell_diameter(g.lattice);
  PixelSet out;
  for (int p = 0; p < g.size(); ++p) {
    const Vec2 x = g.center(p);
    const Vec2 base = nearest_translate(g.lattice, x, c);
    bool hit = false;
    const Eigen::Matrix2d inv = g.lattice.basis().inverse();
    const int b0 = static_cast<int>(std::ceil(reach * inv.row(0).norm())) + 1;
    const int b1 = static_cast<int>(std::ceil(reach * inv.row(1).norm())) + 1;
    for (int a = -b0; a <= b0 && !hit; ++a)
      for (int b = -b1; b <= b1 && !hit; ++b) {
        const Vec2 y = base + g.lattice.point(Vec2i(a, b));
        if ((y - c).norm() <= reach) hit = point_in_polygon(y, poly);
      }
    if (hit) out.push_back(p);
  }
  return out;
}

/// Torus distance between pixel centers for every index offset (di, dj) in
/// [0, n)^2, searched over translates of a reduced basis.
inline std::vector<double> offset_distances(const GridPartition& g) {
  const Lattice red = reduce(g.lattice);
  const Eigen::Matrix2d inv = red.basis().inverse();
  std::vector<double> out(g.size());
  for (int dj = 0; dj < g.n; ++dj)
    for (int di = 0; di < g.n; ++di) {
      const Vec2 v = g.point(di, dj);
      const Eigen::Vector2d f = inv * v;
      const Vec2i k0(static_cast<int>(std::lround(f(0))), static_cast<int>(std::lround(f(1))));
      double best = INFINITY;
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) best = std::min(best, (v - red.point(k0 + Vec2i(a, b))).norm());
      out[dj * g.n + di] = best;
    }
  return out;
}

/// Symmetric Hausdorff distance of two pixel-center sets, torus metric.
inline double hausdorff_distance(const GridPartition& g, const PixelSet& a, const PixelSet& b) {
  require(!a.empty() && !b.empty(), "hausdorff_distance: empty input");
  const std::vector<double> dist = offset_distances(g);
  auto directed = [&](const PixelSet& from, const PixelSet& to) {
    double worst = 0.0;
    for (int p : from) {
      double best = INFINITY;
      for (int q : to) best = std::min(best, dist[g.wrap(g.row(q) - g.row(p)) * g.n + g.wrap(g.col(q) - g.col(p))]);
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

inline double hausdorff_distance(const GridPartition& g, const PixelSet& a, const Polygon& b) {
  const PixelSet rb = rasterize(g, b);
  require(!rb.empty(), "hausdorff_distance: polygon covers no pixel center");
  return hausdorff_distance(g, a, rb);
}

/// Label grid sampled from a polygonal partition at pixel centers.
inline GridPartition rasterize(const PolyPartition& p, int n) {
  require(n >= 1, "rasterize: resolution must be >= 1");
  GridPartition g = GridPartition::filled(p.lattice, n, p.num_cells(), 1);
  for (int ci = 0; ci < p.num_cells(); ++ci) {
    if (p.cells[ci].loop.empty()) continue;
    for (int q : rasterize(g, cell_polygon(p, ci))) g.labels[q] = ci + 1;
  }
  return g;
}

}  // namespace perpart
