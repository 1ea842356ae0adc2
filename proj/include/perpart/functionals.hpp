#pragma once

#include "perpart/error.hpp"
#include "perpart/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace perpart {

/// An even, positively 1-homogeneous convex function used as the surface
/// tension of an anisotropic perimeter. Polyhedral norms are stored through
/// the support points p_k of their Wulff shape conv{+-p_k}, so that
/// phi(nu) = max_k |p_k . nu|.
class Anisotropy {
 public:
  enum class Kind { euclidean, ell1, hexagonal, polyhedral };

  static Anisotropy euclidean() { return Anisotropy(Kind::euclidean, {}); }

  /// |n_x| + |n_y|; Wulff shape is the axis-aligned square.
  static Anisotropy ell1() { return Anisotropy(Kind::ell1, {{1.0, 1.0}, {1.0, -1.0}}); }

  /// Wulff shape is the regular hexagon with inradius 1 and a vertex on the
  /// positive x axis (horizontal top and bottom facets).
  static Anisotropy hexagonal() {
    const double rc = 2.0 / std::numbers::sqrt3;
    std::vector<Vec2> pts;
    for (int k = 0; k < 3; ++k) {
      const double a = k * std::numbers::pi / 3.0;
      pts.emplace_back(rc * std::cos(a), rc * std::sin(a));
    }
    return Anisotropy(Kind::hexagonal, std::move(pts));
  }

  /// phi(nu) = max_k weight_k |direction_k . nu|.
  static Anisotropy polyhedral(const std::vector<std::pair<Vec2, double>>& dirs) {
    require(!dirs.empty(), "polyhedral anisotropy needs at least one direction");
    std::vector<Vec2> pts;
    for (const auto& [d, w] : dirs) {
      require(d.norm() > 0.0 && w > 0.0, "polyhedral anisotropy: bad direction or weight");
      pts.push_back(w * d.normalized());
    }
    // Must be a norm: the support points have to span the plane.
    bool spans = false;
    for (std::size_t i = 0; i < pts.size() && !spans; ++i)
      for (std::size_t j = i + 1; j < pts.size() && !spans; ++j)
        spans = std::abs(cross(pts[i], pts[j])) > 1e-12 * pts[i].norm() * pts[j].norm();
    require(spans, "polyhedral anisotropy is degenerate (support points must span the plane)");
    return Anisotropy(Kind::polyhedral, std::move(pts));
  }

  Kind kind() const { return kind_; }
  const std::vector<Vec2>& support_points() const { return pts_; }

  std::string name() const {
    switch (kind_) {
      case Kind::euclidean: return "euclidean";
      case Kind::ell1: return "ell1";
      case Kind::hexagonal: return "hexagonal";
      case Kind::polyhedral: return "polyhedral";
    }
    return "?";
  }

  /// Value at an arbitrary (not necessarily unit) vector.
  double operator()(const Vec2& nu) const {
    if (kind_ == Kind::euclidean) return nu.norm();
    double best = 0.0;
    for (const Vec2& p : pts_) best = std::max(best, std::abs(p.dot(nu)));
    return best;
  }

  /// A (sub)gradient; exact wherever phi is differentiable.
  Vec2 gradient(const Vec2& nu) const {
    if (kind_ == Kind::euclidean) {
      const double n = nu.norm();
      return n > 0.0 ? Vec2(nu / n) : Vec2::Zero();
    }
    double best = -1.0;
    Vec2 g = Vec2::Zero();
    for (const Vec2& p : pts_) {
      const double v = p.dot(nu);
      if (std::abs(v) > best) {
        best = std::abs(v);
        g = v >= 0.0 ? p : Vec2(-p);
      }
    }
    return g;
  }

  /// Evaluation on normals; rejects the zero vector.
  double at_normal(const Vec2& nu) const {
    require(nu.norm() > 0.0, "phi_eval: zero-vector input");
    return (*this)(nu);
  }

 private:
  Anisotropy(Kind k, std::vector<Vec2> pts) : kind_(k), pts_(std::move(pts)) {}

  Kind kind_;
  std::vector<Vec2> pts_;
};

inline double phi_eval(const Anisotropy& a, const Vec2& normal) { return a.at_normal(normal); }

/// Counter-clockwise Wulff shape with the requested area, centered at the
/// origin. The euclidean case is approximated by a regular 64-gon.
inline Polygon wulff_shape(const Anisotropy& a, double volume) {
  require(volume > 0.0 && std::isfinite(volume), "wulff_shape: volume must be positive");
  Polygon poly;
  if (a.kind() == Anisotropy::Kind::euclidean) {
    constexpr int sides = 64;
    for (int k = 0; k < sides; ++k) {
      const double t = 2.0 * std::numbers::pi * k / sides;
      poly.emplace_back(std::cos(t), std::sin(t));
    }
  } else {
    std::vector<Vec2> pts;
    for (const Vec2& p : a.support_points()) {
      pts.push_back(p);
      pts.push_back(-p);
    }
    // Andrew's monotone chain.
    std::sort(pts.begin(), pts.end(), [](const Vec2& x, const Vec2& y) {
      return x.x() < y.x() || (x.x() == y.x() && x.y() < y.y());
    });
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
      hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
      hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    poly = std::move(hull);
  }
  const double scale = std::sqrt(volume / signed_area(poly));
  for (Vec2& p : poly) p *= scale;
  return poly;
}

/// Anisotropic length of a closed polygon: sum of |t| phi(normal).
inline double anisotropic_perimeter(const Anisotropy& a, std::span<const Vec2> poly) {
  double sum = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k)
    sum += a(right_normal(poly[(k + 1) % poly.size()] - poly[k]));
  return sum;
}

/// Fractional interaction kernel K(x) = |x|^{-(d+s)}, periodized up to a
/// truncation radius. A non-positive truncation radius means "use the
/// default for the lattice at hand".
struct Kernel {
  double s = 0.5;
  double truncation_radius = 0.0;
  int dim = 2;

  void validate() const {
    require(s > 0.0 && s < 1.0, "kernel: s must lie in (0,1)");
    require(dim >= 1 && dim <= 3, "kernel: dimension must be 1, 2 or 3");
    require(std::isfinite(truncation_radius), "kernel: truncation radius must be finite");
  }

  double operator()(double r) const { return std::pow(r, -(dim + s)); }

  /// Shared truncation predicate, tolerant to rounding at exactly |x| = R.
  bool within(double dist2, double radius) const {
    return dist2 <= radius * radius * (1.0 + 1e-12);
  }
};

inline double unit_sphere_area(int dim) {
  return 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0);
}

/// Integral of K outside the ball of radius t: |S^{d-1}| t^{-s} / s.
inline double kernel_tail(const Kernel& k, double t) {
  k.validate();
  require(t > 0.0, "kernel_tail: t must be positive");
  if (std::isinf(t)) return 0.0;
  return unit_sphere_area(k.dim) * std::pow(t, -k.s) / k.s;
}

/// Almost-subadditivity data: constant c and tail function.
struct SubadditivityConstants {
  double c = 1.0;
  std::function<double(double)> tail;
};

inline SubadditivityConstants local_subadditivity() { return {1.0, [](double) { return 0.0; }}; }

inline SubadditivityConstants nonlocal_subadditivity(const Kernel& k) {
  return {2.0, [k](double t) { return kernel_tail(k, t); }};
}

namespace detail {

// 40-point Gauss-Legendre nodes on [-1,1] computed once by Newton iteration.
struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) {
          x[i] = z;
          w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
          break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
      }
    }
  }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    double s = 0.0;
    const double m = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(m + h * x[i]);
    return s * h;
  }
};

inline const GaussLegendre& gauss_legendre40() {
  static const GaussLegendre gl(40);
  return gl;
}

}  // namespace detail

/// Exact interaction integral of the planar fractional kernel between two
/// unit squares sharing a side,
///   I(s) = int_{[0,1]^2} int_{[1,2]x[0,1]} |x-y|^{-2-s} dy dx.
/// The radial integral is done in closed form on each piece of the
/// (piecewise bilinear) difference density; the angle by Gauss-Legendre.
inline double adjacent_square_interaction(double s) {
  require(s > 0.0 && s < 1.0, "adjacent_square_interaction: s must lie in (0,1)");
  auto radial = [s](double theta) {
    const double c = std::cos(theta), sn = std::abs(std::sin(theta));
    const double rmax = std::min(c > 0.0 ? 2.0 / c : INFINITY, sn > 0.0 ? 1.0 / sn : INFINITY);
    const double a = std::min(1.0 / c, rmax);
    double v = c * std::pow(a, 1.0 - s) / (1.0 - s) - c * sn * std::pow(a, 2.0 - s) / (2.0 - s);
    if (1.0 / c < rmax) {
      auto F = [&](double r) {
        return -2.0 * std::pow(r, -s) / s - (2.0 * sn + c) * std::pow(r, 1.0 - s) / (1.0 - s) +
               c * sn * std::pow(r, 2.0 - s) / (2.0 - s);
      };
      v += F(rmax) - F(1.0 / c);
    }
    return v;
  };
  const auto& gl = detail::gauss_legendre40();
  const double t1 = std::atan(0.5), t2 = std::numbers::pi / 4.0, t3 = std::numbers::pi / 2.0;
  const double half =
      gl.integrate(radial, 0.0, t1) + gl.integrate(radial, t1, t2) + gl.integrate(radial, t2, t3);
  return 2.0 * half;
}

}  // namespace perpart
