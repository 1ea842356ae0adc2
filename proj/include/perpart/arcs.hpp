#pragma once

#include "perpart/error.hpp"
#include "perpart/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace perpart {

/// Least-squares circle or line through a polyline.
struct ArcFit {
  double kappa = 0.0;  // unsigned curvature, 0 for lines
  double rms = 0.0;    // geometric residual
  bool line = true;
  Vec2 center = Vec2::Zero();
};

inline constexpr double kStraightCurvature = 1e-6;

namespace detail {

inline ArcFit fit_line(std::span<const Vec2> pts, const Vec2& mean) {
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Vec2& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
  es.computeDirect(cov);
  const Vec2 normal = es.eigenvectors().col(0);
  double ss = 0.0;
  for (const Vec2& p : pts) ss += std::pow((p - mean).dot(normal), 2);
  ArcFit f;
  f.rms = std::sqrt(ss / pts.size());
  return f;
}

}  // namespace detail

/// Pratt algebraic circle fit (SVD form) on centered, scaled data; falls
/// back to a total-least-squares line when |kappa| < 1e-6 or when the line
/// fits no worse (near-collinear data makes the algebraic fit unstable).
inline ArcFit fit_circle(std::span<const Vec2> pts) {
  require(pts.size() >= 2, "arc fit: need at least two points");
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double scale = 0.0;
  for (const Vec2& p : pts) scale += (p - mean).squaredNorm();
  scale = std::sqrt(scale / pts.size());
  require(scale > 0.0, "arc fit: degenerate (zero-length) polyline");
  const ArcFit line = detail::fit_line(pts, mean);
  if (pts.size() < 3 || line.rms <= 1e-9 * scale) return line;

  const int m = static_cast<int>(pts.size());
  Eigen::MatrixXd z(m, 4);
  for (int k = 0; k < m; ++k) {
    const Vec2 q = (pts[k] - mean) / scale;
    z.row(k) << q.squaredNorm(), q.x(), q.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
  const Eigen::Vector4d sv = svd.singularValues();
  const Eigen::Matrix4d v = svd.matrixV();
  Eigen::Vector4d a;
  if (sv(3) < 1e-12 * sv(0)) {
    a = v.col(3);
  } else {
    const Eigen::Matrix4d y = v * sv.asDiagonal() * v.transpose();
    Eigen::Matrix4d ninv = Eigen::Matrix4d::Zero();
    ninv(0, 3) = ninv(3, 0) = -0.5;
    ninv(1, 1) = ninv(2, 2) = 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(y * ninv * y));
    int pick = -1;
    for (int k = 0; k < 4; ++k)
      if (es.eigenvalues()(k) > 0.0 && (pick < 0 || es.eigenvalues()(k) < es.eigenvalues()(pick))) pick = k;
    require(pick >= 0, "arc fit failed", ErrorKind::numerical_failure);
    a = v * sv.cwiseInverse().asDiagonal() * v.transpose() * es.eigenvectors().col(pick);
  }
  const double disc = a(1) * a(1) + a(2) * a(2) - 4.0 * a(0) * a(3);
  require(disc > 0.0, "arc fit failed", ErrorKind::numerical_failure);
  const double kappa = 2.0 * std::abs(a(0)) / std::sqrt(disc) / scale;
  if (kappa < kStraightCurvature) return line;

  ArcFit f;
  f.line = false;
  f.kappa = kappa;
  f.center = mean + scale * Vec2(-a(1), -a(2)) / (2.0 * a(0));
  const double r = 1.0 / kappa;
  double ss = 0.0;
  for (const Vec2& p : pts) ss += std::pow((p - f.center).norm() - r, 2);
  f.rms = std::sqrt(ss / m);
  return f.rms < line.rms ? f : line;
}

/// Signed curvature of a directed polyline: positive when the fitted center
/// lies on its left, i.e. the arc is concave towards the left side.
inline double signed_curvature(std::span<const Vec2> pts, const ArcFit& f) {
  if (f.line) return 0.0;
  const std::size_t k = pts.size() / 2;
  const Vec2 t = pts[std::min(k + 1, pts.size() - 1)] - pts[k == 0 ? 0 : k - 1];
  return cross(t, f.center - pts[k]) > 0.0 ? f.kappa : -f.kappa;
}

}  // namespace perpart
