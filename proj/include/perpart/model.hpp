#pragma once

#include "perpart/error.hpp"
#include "perpart/functionals.hpp"
#include "perpart/lattice.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace perpart {

enum class PerimeterKind { classical, anisotropic, nonlocal };
enum class VolumeMode { constrained, penalized };

/// Which perimeter, the weight mu of Per(D), and how cell volumes enter:
/// as hard constraints or through the penalty lambda * sum ||E_i| - v_i|.
struct EnergyModel {
  PerimeterKind perimeter = PerimeterKind::classical;
  Anisotropy anisotropy = Anisotropy::euclidean();
  Kernel kernel{};
  double mu = 0.0;
  VolumeMode mode = VolumeMode::constrained;
  std::vector<double> volumes;
  double lambda = 0.0;

  static EnergyModel classical(std::vector<double> v) {
    EnergyModel m;
    m.volumes = std::move(v);
    return m;
  }

  static EnergyModel anisotropic(Anisotropy a, std::vector<double> v) {
    EnergyModel m;
    m.perimeter = PerimeterKind::anisotropic;
    m.anisotropy = std::move(a);
    m.volumes = std::move(v);
    return m;
  }

  static EnergyModel nonlocal(Kernel k, std::vector<double> v) {
    EnergyModel m;
    m.perimeter = PerimeterKind::nonlocal;
    m.kernel = k;
    m.volumes = std::move(v);
    return m;
  }

  EnergyModel& penalized(double lam) {
    mode = VolumeMode::penalized;
    lambda = lam;
    return *this;
  }

  bool is_local() const { return perimeter != PerimeterKind::nonlocal; }

  /// Surface tension used by the local perimeters.
  const Anisotropy& norm() const {
    static const Anisotropy euclid = Anisotropy::euclidean();
    return perimeter == PerimeterKind::anisotropic ? anisotropy : euclid;
  }

  void validate(double lattice_volume) const {
    require(mu >= 0.0, "energy model: mu must be >= 0");
    require(!volumes.empty(), "energy model: empty volume vector");
    if (perimeter == PerimeterKind::nonlocal) kernel.validate();
    if (mode == VolumeMode::penalized) {
      require(lambda > 0.0, "energy model: lambda must be > 0 in penalized mode");
      for (double v : volumes) require(v >= 0.0, "energy model: target volumes must be >= 0");
    } else {
      for (double v : volumes) require(v > 0.0, "energy model: target volumes must be > 0");
      const double sum = std::accumulate(volumes.begin(), volumes.end(), 0.0);
      require(std::abs(sum - lattice_volume) <= 1e-9 * std::max(1.0, lattice_volume),
              "energy model: target volumes must sum to the lattice volume");
    }
  }
};

struct CellEnergy {
  double area = 0.0;
  double perimeter = 0.0;
  double penalty = 0.0;
};

/// total = mu_term + half_sum_perimeters + penalty_term.
struct EnergyBreakdown {
  double total = 0.0;
  double mu_term = 0.0;
  double half_sum_perimeters = 0.0;
  double penalty_term = 0.0;
  double volume_residual = 0.0;  // max_i ||E_i| - v_i|
  std::vector<CellEnergy> per_cell;
};

/// Constant Lambda of the (Lambda, r)-minimality property of minimizers
/// with mu = 0:
///   local constrained 0, local penalized lambda,
///   non-local constrained tail(rho_G - 2r), non-local penalized lambda + tail(rho_G - 2r).
inline double lambda_constant(const EnergyModel& model, const Lattice& lat, double r) {
  const double rho = packing_radius(lat);
  require(r >= 0.0 && r < rho / 2.0, "lambda_constant: r must satisfy 0 <= r < rho_G/2");
  double lam = model.mode == VolumeMode::penalized ? model.lambda : 0.0;
  if (!model.is_local()) lam += kernel_tail(model.kernel, rho - 2.0 * r);
  return lam;
}

inline SubadditivityConstants subadditivity(const EnergyModel& model) {
  return model.is_local() ? local_subadditivity() : nonlocal_subadditivity(model.kernel);
}

}  // namespace perpart
