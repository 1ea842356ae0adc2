#pragma once

#include "perpart/error.hpp"
#include "perpart/functionals.hpp"
#include "perpart/geometry.hpp"
#include "perpart/lattice.hpp"
#include "perpart/poly_partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace perpart {

inline constexpr int kDefaultSamples = 16;

/// Perimeter of the unit-area regular hexagon, 2 * 12^(1/4).
inline double hexagon_perimeter() { return 2.0 * std::pow(12.0, 0.25); }

/// Geometry of the unit-area regular hexagon (flat top, horizontal edges)
/// and its stretched variants H(v).
struct HexParams {
  double l = std::sqrt(2.0 / (3.0 * std::numbers::sqrt3));  // edge length
  double h = std::numbers::sqrt3 * std::sqrt(2.0 / (3.0 * std::numbers::sqrt3)) / 2.0;  // half height

  /// Stretch of the horizontal edges giving area v: v = 1 + sqrt(3) l x.
  double x_of_volume(double v) const { return (v - 1.0) / (std::numbers::sqrt3 * l); }
  double volume_of_x(double x) const { return 1.0 + std::numbers::sqrt3 * l * x; }
  double perimeter_of_x(double x) const { return 6.0 * l + 2.0 * x; }
};

/// Row of stretched hexagons H(v_1), ..., H(v_N), each sharing an oblique
/// edge with its predecessor, closed periodically.
inline PolyPartition stretched_hex_domain(const std::vector<double>& v, int samples = kDefaultSamples) {
  const int n = static_cast<int>(v.size());
  require(n >= 1, "stretched_hex_domain: need at least one volume");
  for (double vi : v) require(vi > 0.5 && vi < 1.5, "stretched_hex_domain: volumes must lie in (1/2, 3/2)");
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  require(std::abs(sum - n) <= 1e-9 * n, "stretched_hex_domain: volumes must sum to N");

  const HexParams hp;
  const double l = hp.l, h = hp.h;
  std::vector<Vec2> verts(2 * n);
  Vec2 left = Vec2::Zero();
  for (int i = 0; i < n; ++i) {
    const double x = hp.x_of_volume(v[i]);
    verts[2 * i] = left + Vec2(1.5 * l + x, h);   // upper right
    verts[2 * i + 1] = left + Vec2(2.0 * l + x, 0.0);  // right
    left += Vec2(1.5 * l + x, h);
  }
  const Lattice lat = Lattice::planar(left, Vec2(0.0, 2.0 * h));

  std::vector<std::vector<Corner>> cells;
  for (int i = 0; i < n; ++i) {
    const int prev = (i + n - 1) % n;
    const Vec2i back = i == 0 ? Vec2i(-1, 0) : Vec2i(0, 0);
    cells.push_back({{2 * prev, back},
                     {2 * prev + 1, back},
                     {2 * i, Vec2i(0, -1)},
                     {2 * i + 1, Vec2i(0, 0)},
                     {2 * i, Vec2i(0, 0)},
                     {2 * prev + 1, back + Vec2i(0, 1)}});
  }
  return build_from_corners(lat, std::move(verts), cells, v, samples);
}

/// N unit-area regular hexagons in a row on the N-honeycomb lattice.
inline PolyPartition honeycomb(int n, int samples = kDefaultSamples) {
  require(n >= 1, "honeycomb: N must be >= 1");
  return stretched_hex_domain(std::vector<double>(n, 1.0), samples);
}

/// Axis-aligned squares of areas v_i arranged in rows of a common width.
/// Feasible when equal volumes can be grouped into full rows; otherwise
/// throws invalid_input ("infeasible").
inline PolyPartition wulff_tiling(const Anisotropy& a, const std::vector<double>& v,
                                  int samples = kDefaultSamples) {
  require(a.kind() == Anisotropy::Kind::ell1, "wulff_tiling: only the ell1 anisotropy is supported",
          ErrorKind::unsupported);
  const int n = static_cast<int>(v.size());
  require(n >= 1, "wulff_tiling: need at least one volume");
  for (double x : v) require(x > 0.0, "wulff_tiling: volumes must be positive");

  // Groups of equal volume, largest squares first.
  std::vector<std::vector<int>> groups;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return v[i] > v[j]; });
  for (int i : order) {
    if (!groups.empty() && std::abs(v[groups.back().front()] - v[i]) <= 1e-12 * v[i])
      groups.back().push_back(i);
    else
      groups.push_back({i});
  }
  const double smax = std::sqrt(v[groups.front().front()]);

  double best_w = -1.0, best_score = INFINITY;
  for (int j = 1; j <= n; ++j) {
    const double w = smax * j;
    double height = 0.0;
    bool ok = true;
    for (const auto& g : groups) {
      const double s = std::sqrt(v[g.front()]);
      const double c = w / s;
      const long ci = std::lround(c);
      if (ci < 1 || std::abs(c - ci) > 1e-9 * c || static_cast<long>(g.size()) % ci != 0) {
        ok = false;
        break;
      }
      height += static_cast<double>(g.size() / ci) * s;
    }
    if (!ok) continue;
    const double score = std::abs(std::log(w / height));
    if (score < best_score - 1e-12) {
      best_score = score;
      best_w = w;
    }
  }
  require(best_w > 0.0, "wulff_tiling: infeasible volume vector (squares do not tile a rectangle)");

  std::vector<Polygon> polys(n);
  double y = 0.0;
  for (const auto& g : groups) {
    const double s = std::sqrt(v[g.front()]);
    const long c = std::lround(best_w / s);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x0 = s * static_cast<double>(static_cast<long>(k) % c);
      const double y0 = y + s * static_cast<double>(static_cast<long>(k) / c);
      polys[g[k]] = {{x0, y0}, {x0 + s, y0}, {x0 + s, y0 + s}, {x0, y0 + s}};
    }
    y += s * static_cast<double>(static_cast<long>(g.size()) / c);
  }
  return build_from_polygons(Lattice::planar({best_w, 0.0}, {0.0, y}), polys, v, samples);
}

/// Slices of the basis parallelogram parallel to e1, with exact volumes.
inline PolyPartition slab_partition(const Lattice& lat, const std::vector<double>& v,
                                    int samples = kDefaultSamples) {
  require(lat.dim() == 2, "slab_partition: planar lattices only", ErrorKind::unsupported);
  require(!v.empty(), "slab_partition: need at least one volume");
  const double vol = volume(lat);
  for (double x : v) require(x > 0.0, "slab_partition: volumes must be positive");
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  require(std::abs(sum - vol) <= 1e-9 * std::max(1.0, vol), "slab_partition: volumes must sum to d(G)");
  const Vec2 e1 = lat.e(0), e2 = lat.e(1);
  const bool ccw = cross(e1, e2) > 0.0;
  std::vector<Polygon> polys;
  double t0 = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    acc += v[k];
    const double t1 = k + 1 == v.size() ? 1.0 : acc / vol;
    Polygon poly{t0 * e2, e1 + t0 * e2, e1 + t1 * e2, t1 * e2};
    if (!ccw) std::reverse(poly.begin() + 1, poly.end());
    polys.push_back(poly);
    t0 = t1;
  }
  return build_from_polygons(lat, polys, v, samples);
}

/// Result of the two-block construction: the partition, its energy, the
/// analytic leading term and the bound leading + C N.
struct TwoBlock {
  PolyPartition partition;
  double energy = 0.0;
  double leading = 0.0;
  double c = 0.0;
  double bound = 0.0;
};

inline double twoblock_leading_term(int n, double delta) {
  return (std::sqrt(1.0 - delta) + std::sqrt(1.0 + delta)) * hexagon_perimeter() * n * n / 4.0;
}

namespace detail {

// Rows of unit height; even rows have vertical sides at the cumulative cell
// widths, odd rows at the same abscissae shifted by 1/2. Row boundaries
// zigzag by +-eps, which turns every cell into a hexagon of exact area.
inline std::vector<Polygon> twoblock_polygons(int n, double delta, double eps) {
  const int c = n / 2;
  std::vector<double> edges{0.0};
  for (int k = 0; k < n; ++k) edges.push_back(edges.back() + (k < c ? 1.0 - delta : 1.0 + delta));
  std::vector<Polygon> out;
  for (int r = 0; r < n; ++r) {
    const double shift = r % 2 == 0 ? 0.0 : 0.5;
    const double other = r % 2 == 0 ? 0.5 : -0.5;  // zig vertices of the neighbouring rows
    for (int k = 0; k < n; ++k) {
      const double xa = edges[k] + shift, xb = edges[k + 1] + shift;
      const double zig = xa + other + (other < 0.0 ? (xb - xa) : 0.0);
      out.push_back({{xa, r + eps},
                     {zig, r - eps},
                     {xb, r + eps},
                     {xb, r + 1.0 - eps},
                     {zig, r + 1.0 + eps},
                     {xa, r + 1.0 - eps}});
    }
  }
  return out;
}

inline std::vector<double> twoblock_volumes(int n, double delta) {
  std::vector<double> v;
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < n; ++k) v.push_back(k < n / 2 ? 1.0 - delta : 1.0 + delta);
  return v;
}

inline double twoblock_half_perimeter(int n, double delta, double eps) {
  double sum = 0.0;
  for (const Polygon& p : twoblock_polygons(n, delta, eps)) sum += perimeter(p);
  return 0.5 * sum;
}

}  // namespace detail

/// Competitor on N Z^2 with N^2/2 cells of area 1 - delta in the left block
/// and N^2/2 of area 1 + delta in the right block. Each block is a row
/// pattern of hexagonal cells; the zigzag height is chosen to minimize the
/// energy. `c` overrides the measured correction constant when given.
inline TwoBlock twoblock_competitor(int n, double delta, std::optional<double> c = std::nullopt,
                                    int samples = kDefaultSamples) {
  require(n >= 2 && n % 2 == 0, "twoblock_competitor: N must be even and >= 2");
  require(delta >= 0.0 && delta < 0.5, "twoblock_competitor: delta must lie in [0, 1/2)");
  require(!c || *c >= 0.0, "twoblock_competitor: C must be >= 0");
  // golden-section search for the zigzag height
  double lo = 1e-3, hi = 0.45;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = detail::twoblock_half_perimeter(n, delta, a), fb = detail::twoblock_half_perimeter(n, delta, b);
  for (int it = 0; it < 80; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = detail::twoblock_half_perimeter(n, delta, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = detail::twoblock_half_perimeter(n, delta, b);
    }
  }
  const double eps = 0.5 * (lo + hi);
  TwoBlock out;
  out.partition = build_from_polygons(Lattice::square(n), detail::twoblock_polygons(n, delta, eps),
                                      detail::twoblock_volumes(n, delta), samples);
  out.energy = total_energy(out.partition, EnergyModel::classical(out.partition.targets())).total;
  out.leading = twoblock_leading_term(n, delta);
  out.c = c ? *c : std::max(0.0, (out.energy - out.leading) / n);
  out.bound = out.leading + out.c * n;
  return out;
}

namespace detail {

// Sutherland-Hodgman step: keep the side of the bisector of s and q that contains s.
inline Polygon clip_halfplane(const Polygon& poly, const Vec2& s, const Vec2& q) {
  const Vec2 m = 0.5 * (s + q), d = q - s;
  auto val = [&](const Vec2& x) { return (x - m).dot(d); };
  Polygon out;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vec2& a = poly[k];
    const Vec2& b = poly[(k + 1) % poly.size()];
    const double va = val(a), vb = val(b);
    if (va <= 0.0) out.push_back(a);
    if ((va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0)) out.push_back(a + (b - a) * (va / (va - vb)));
  }
  return out;
}

}  // namespace detail

/// Periodic Voronoi partition of the given sites. Cell areas are whatever the
/// diagram gives; `targets` are stored as the prescribed volumes.
inline PolyPartition voronoi_partition(const Lattice& lat, const std::vector<Vec2>& sites,
                                       const std::vector<double>& targets, int samples = kDefaultSamples) {
  require(!sites.empty() && sites.size() == targets.size(), "voronoi_partition: one target per site");
  const double rc = covering_radius(lat);
  std::vector<Polygon> polys;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Vec2 s = sites[i];
    const double box = 2.0 * rc;
    Polygon cell{s + Vec2(-box, -box), s + Vec2(box, -box), s + Vec2(box, box), s + Vec2(-box, box)};
    for (std::size_t j = 0; j < sites.size(); ++j) {
      for (const auto& g : points_in_ball(lat, 2.0 * rc + (sites[j] - s).norm())) {
        const Vec2 q = sites[j] + Vec2(lat.point(g));
        const double dist = (q - s).norm();
        if (i == j && g.coeffs.isZero()) continue;
        require(dist > 1e-9 * std::sqrt(volume(lat)), "voronoi_partition: coincident sites");
        if (dist <= 2.0 * rc * (1.0 + 1e-9)) cell = detail::clip_halfplane(cell, s, q);
      }
    }
    // drop near-duplicate consecutive points left by clipping through corners
    Polygon clean;
    for (const Vec2& x : cell)
      if (clean.empty() || (x - clean.back()).norm() > 1e-12) clean.push_back(x);
    while (clean.size() > 1 && (clean.front() - clean.back()).norm() <= 1e-12) clean.pop_back();
    polys.push_back(clean);
  }
  return build_from_polygons(lat, polys, targets, samples, 1e-8 * std::sqrt(volume(lat)));
}

/// Seeded random displacement of vertices and samples. Vertex moves are
/// bounded by a quarter of the shortest incident edge; samples follow their
/// endpoints and get a smooth random bump along the edge normal. Areas are
/// not restored.
inline PolyPartition perturb(const PolyPartition& p, double amplitude, std::uint64_t seed) {
  require(amplitude >= 0.0 && std::isfinite(amplitude), "perturb: amplitude must be >= 0");
  if (amplitude == 0.0) return p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<double> reach(p.vertices.size(), INFINITY);
  std::vector<double> chord(p.edges.size());
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Polyline pl = edge_polyline(p, static_cast<int>(e));
    chord[e] = (pl.pts.back() - pl.pts.front()).norm();
    reach[p.edges[e].tail] = std::min(reach[p.edges[e].tail], chord[e]);
    reach[p.edges[e].head] = std::min(reach[p.edges[e].head], chord[e]);
  }
  PolyPartition q = p;
  std::vector<Vec2> dv(p.vertices.size());
  for (std::size_t v = 0; v < p.vertices.size(); ++v) {
    const double cap = std::min(amplitude, 0.25 * reach[v]);
    Vec2 d(unit(rng), unit(rng));
    if (d.norm() > 1.0) d.normalize();
    dv[v] = cap * d;
    q.vertices[v] += dv[v];
  }
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    Edge& ed = q.edges[e];
    const Polyline pl = edge_polyline(p, static_cast<int>(e));
    const Vec2 t = (pl.pts.back() - pl.pts.front()).normalized();
    const Vec2 nrm(-t.y(), t.x());
    const double bump = std::min(amplitude, 0.15 * chord[e]) * unit(rng);
    const std::size_t m = ed.samples.size();
    for (std::size_t k = 0; k < m; ++k) {
      const double s = static_cast<double>(k + 1) / (m + 1);
      ed.samples[k] += (1.0 - s) * dv[ed.tail] + s * dv[ed.head] + bump * std::sin(std::numbers::pi * s) * nrm;
    }
  }
  for (int ci = 0; ci < q.num_cells(); ++ci)
    require(q.cells[ci].loop.empty() || is_simple_polygon(cell_polygon(q, ci)),
            "perturb: amplitude causes self-intersection");
  return q;
}

/// Exploration-only candidates (no optimality claim): the single-cell
/// honeycomb with one or two small triangular cells placed at its triple
/// junctions. v = (big, small[, small]).
inline PolyPartition junction_candidate(const std::vector<double>& v, int samples = kDefaultSamples) {
  require(v.size() == 2 || v.size() == 3, "junction_candidate: N must be 2 or 3");
  for (double x : v) require(x > 0.0, "junction_candidate: volumes must be positive");
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  const PolyPartition hex = stretched_hex_domain({1.0}, 0);
  const double scale = std::sqrt(total);
  const Lattice lat(hex.lattice.basis() * scale);
  const CellChain ch = cell_chain(hex, 0);
  const double l = HexParams{}.l * scale;

  Polygon big;
  std::vector<Polygon> small;
  std::vector<int> cut;
  for (std::size_t k = 1; k < v.size(); ++k) cut.push_back(static_cast<int>(k) - 1);  // vertex ids 0, 1
  std::vector<bool> done(2, false);
  const std::size_t m = ch.pts.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 x = ch.pts[k] * scale;
    const int id = ch.dof[k];
    const auto it = std::find(cut.begin(), cut.end(), id);
    if (it == cut.end()) {
      big.push_back(x);
      continue;
    }
    const double area = v[1 + (it - cut.begin())];
    const double t = std::sqrt(4.0 * area / (3.0 * std::numbers::sqrt3));
    require(t < 0.5 * l, "junction_candidate: small volume too large");
    const Vec2 up = (ch.pts[(k + m - 1) % m] * scale - x).normalized();
    const Vec2 un = (ch.pts[(k + 1) % m] * scale - x).normalized();
    big.push_back(x + t * up);
    big.push_back(x + t * un);
    if (!done[id]) {
      done[id] = true;
      Polygon tri{x + t * up, x - t * (up + un).normalized(), x + t * un};
      if (signed_area(tri) < 0.0) std::swap(tri[1], tri[2]);
      small.push_back(tri);
    }
  }
  std::vector<Polygon> polys{big};
  for (const Polygon& p : small) polys.push_back(p);
  return build_from_polygons(lat, polys, v, samples);
}

}  // namespace perpart
