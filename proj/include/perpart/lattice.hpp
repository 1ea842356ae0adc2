#pragma once

#include "perpart/error.hpp"
#include "perpart/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace perpart {

/// Integer coordinates of a lattice point in a given basis.
struct LatticeVector {
  Eigen::VectorXi coeffs;

  friend bool operator==(const LatticeVector& a, const LatticeVector& b) {
    return a.coeffs == b.coeffs;
  }
};

/// A rank-d discrete subgroup of R^d, stored through a basis whose columns are
/// the generators.
class Lattice {
 public:
  explicit Lattice(Eigen::MatrixXd basis) : basis_(std::move(basis)) {
    require(basis_.rows() >= 1 && basis_.rows() == basis_.cols(), "lattice basis must be square");
    require(basis_.allFinite(), "lattice basis must be finite");
    require(std::abs(basis_.determinant()) > 1e-300, "lattice basis is singular");
  }

  static Lattice planar(const Vec2& e1, const Vec2& e2) {
    Eigen::Matrix2d b;
    b.col(0) = e1;
    b.col(1) = e2;
    return Lattice(b);
  }

  /// side * Z^2
  static Lattice square(double side = 1.0) { return planar({side, 0.0}, {0.0, side}); }

  /// Hexagonal lattice with basis (a,0), (a/2, a*sqrt(3)/2) scaled to the given volume.
  static Lattice hexagonal(double volume = 1.0) {
    const double a = std::sqrt(2.0 * volume / std::numbers::sqrt3);
    return planar({a, 0.0}, {a / 2.0, a * std::numbers::sqrt3 / 2.0});
  }

  int dim() const { return static_cast<int>(basis_.rows()); }
  const Eigen::MatrixXd& basis() const { return basis_; }

  Vec2 e(int i) const {
    require(dim() == 2, "planar accessor on non-planar lattice", ErrorKind::unsupported);
    return basis_.col(i);
  }

  Vec2 point(const Vec2i& k) const { return e(0) * k.x() + e(1) * k.y(); }
  Eigen::VectorXd point(const LatticeVector& g) const { return basis_ * g.coeffs.cast<double>(); }

  /// Coordinates of x in the basis.
  Eigen::VectorXd fractional(const Eigen::VectorXd& x) const { return basis_.partialPivLu().solve(x); }

  friend bool operator==(const Lattice& a, const Lattice& b) { return a.basis_ == b.basis_; }

 private:
  Eigen::MatrixXd basis_;
};

inline double volume(const Lattice& lat) { return std::abs(lat.basis().determinant()); }

/// Change of basis by an integer matrix. Same group iff |det(u)| == 1.
inline Lattice transform(const Lattice& lat, const Eigen::MatrixXi& u) {
  return Lattice(lat.basis() * u.cast<double>());
}

namespace detail {

/// Polar angle of the sign-canonical representative of +-v, in [0, pi).
inline double canonical_angle(const Eigen::VectorXd& v) {
  double a = std::atan2(v(1), v(0));
  if (a < 0.0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a -= std::numbers::pi;
  return a;
}

inline Eigen::VectorXd canonical_sign(Eigen::VectorXd v) {
  for (int i = v.size() - 1; i >= 0; --i) {
    if (v(i) > 0.0) break;
    if (v(i) < 0.0) {
      v = -v;
      break;
    }
  }
  return v;
}

inline void gauss_reduce_pair(Eigen::VectorXd& a, Eigen::VectorXd& b) {
  for (int guard = 0; guard < 10000; ++guard) {
    if (b.squaredNorm() < a.squaredNorm()) std::swap(a, b);
    const double mu = std::round(a.dot(b) / a.squaredNorm());
    if (mu == 0.0) return;
    b -= mu * a;
  }
}

}  // namespace detail

/// Lagrange-Gauss reduction (d = 2) or iterated pairwise size reduction
/// (d = 3). The returned basis spans the same group and lists shortest
/// vectors first. In d = 2, among vectors of equal length (relative 1e-12)
/// the one with the smaller sign-canonical polar angle comes first.
inline Lattice reduce(const Lattice& lat) {
  const int d = lat.dim();
  if (d == 1) return Lattice(lat.basis().cwiseAbs());
  require(d <= 3, "reduce: dimension-unsupported (d > 3)", ErrorKind::unsupported);

  std::vector<Eigen::VectorXd> b;
  for (int i = 0; i < d; ++i) b.push_back(lat.basis().col(i));

  if (d == 2) {
    detail::gauss_reduce_pair(b[0], b[1]);
    // Successive minima among +-b1, +-b2, +-(b1 +- b2).
    std::vector<Eigen::VectorXd> cand;
    for (int i = -1; i <= 1; ++i)
      for (int j = -1; j <= 1; ++j)
        if (i != 0 || j != 0) cand.push_back(detail::canonical_sign(i * b[0] + j * b[1]));
    auto less = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
      const double lx = x.norm(), ly = y.norm();
      if (std::abs(lx - ly) > 1e-12 * std::max(lx, ly)) return lx < ly;
      return detail::canonical_angle(x) < detail::canonical_angle(y);
    };
    std::stable_sort(cand.begin(), cand.end(), less);
    const Eigen::VectorXd first = cand.front();
    Eigen::VectorXd second = first;
    for (const auto& v : cand) {
      if (std::abs(first(0) * v(1) - first(1) * v(0)) > 1e-12 * first.squaredNorm()) {
        second = v;
        break;
      }
    }
    Eigen::Matrix2d out;
    out.col(0) = first;
    out.col(1) = second;
    return Lattice(out);
  }

  bool changed = true;
  for (int guard = 0; changed && guard < 1000; ++guard) {
    changed = false;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        const double mu = std::round(b[i].dot(b[j]) / b[i].squaredNorm());
        if (mu != 0.0) {
          Eigen::VectorXd next = b[j] - mu * b[i];
          if (next.squaredNorm() < b[j].squaredNorm() * (1.0 - 1e-14)) {
            b[j] = next;
            changed = true;
          }
        }
      }
  }
  std::stable_sort(b.begin(), b.end(),
                   [](const auto& x, const auto& y) { return x.squaredNorm() < y.squaredNorm(); });
  Eigen::MatrixXd out(d, d);
  for (int i = 0; i < d; ++i) out.col(i) = detail::canonical_sign(b[i]);
  return Lattice(out);
}

/// Lattice points g with |g| <= radius, in lexicographic order of their
/// coefficients.
inline std::vector<LatticeVector> points_in_ball(const Lattice& lat, double radius) {
  require(radius >= 0.0 && std::isfinite(radius), "points_in_ball: radius must be >= 0");
  const int d = lat.dim();
  const Eigen::MatrixXd inv = lat.basis().inverse();
  Eigen::VectorXi bound(d);
  for (int i = 0; i < d; ++i)
    bound(i) = static_cast<int>(std::floor(radius * inv.row(i).norm() * (1.0 + 1e-12))) + 0;
  const double r2 = radius * radius * (1.0 + 1e-12);

  std::vector<LatticeVector> out;
  Eigen::VectorXi k = -bound;
  while (true) {
    if ((lat.basis() * k.cast<double>()).squaredNorm() <= r2) out.push_back({k});
    int i = d - 1;
    while (i >= 0 && k(i) == bound(i)) {
      k(i) = -bound(i);
      --i;
    }
    if (i < 0) break;
    ++k(i);
  }
  return out;
}

/// Half the length of the shortest nonzero lattice vector.
inline double packing_radius(const Lattice& lat) {
  const int d = lat.dim();
  if (d <= 2) return 0.5 * reduce(lat).basis().col(0).norm();
  require(d == 3, "packing_radius: dimension-unsupported (d > 3)", ErrorKind::unsupported);
  const Lattice red = reduce(lat);
  double best = red.basis().col(0).norm();
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      for (int c = -2; c <= 2; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        best = std::min(best, (red.basis() * Eigen::Vector3d(a, b, c)).norm());
      }
  return 0.5 * best;
}

/// Covering radius, as the circumradius of the (non-obtuse) Delaunay
/// triangle spanned by a reduced basis. Planar lattices only.
inline double covering_radius(const Lattice& lat) {
  if (lat.dim() == 1) return 0.5 * std::abs(lat.basis()(0, 0));
  require(lat.dim() == 2, "covering_radius: dimension-unsupported (d > 2)", ErrorKind::unsupported);
  const Lattice red = reduce(lat);
  const Vec2 u = red.e(0);
  Vec2 w = red.e(1);
  if (u.dot(w) < 0.0) w = -w;
  // circumcenter of (0, u, w)
  const double den = 2.0 * cross(u, w);
  const Vec2 c{(w.y() * u.squaredNorm() - u.y() * w.squaredNorm()) / den,
               (u.x() * w.squaredNorm() - w.x() * u.squaredNorm()) / den};
  const double r = c.norm();
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      const Vec2 p = u * i + red.e(1) * j;
      require((p - c).norm() >= r * (1.0 - 1e-9), "covering_radius: Delaunay check failed",
              ErrorKind::numerical_failure);
    }
  return r;
}

/// The half-open basis parallelepiped {sum t_i e_i : t_i in [0,1)}.
struct Parallelepiped {
  Eigen::MatrixXd generators;

  double measure() const { return std::abs(generators.determinant()); }

  /// All 2^d corners, ordered by the binary expansion of their index.
  std::vector<Eigen::VectorXd> corners() const {
    const int d = static_cast<int>(generators.cols());
    std::vector<Eigen::VectorXd> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < d; ++i)
        if (mask & (1 << i)) p += generators.col(i);
      out.push_back(p);
    }
    return out;
  }

  /// Counter-clockwise boundary for d = 2.
  Polygon polygon() const {
    require(generators.cols() == 2, "parallelepiped polygon needs d = 2", ErrorKind::unsupported);
    const Vec2 a = generators.col(0), b = generators.col(1);
    Polygon p{Vec2::Zero(), a, a + b, b};
    if (signed_area(p) < 0.0) std::reverse(p.begin() + 1, p.end());
    return p;
  }

  double perimeter() const { return perpart::perimeter(polygon()); }
};

inline Parallelepiped fundamental_parallelepiped(const Lattice& lat) { return {lat.basis()}; }

}  // namespace perpart
