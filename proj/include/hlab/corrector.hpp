#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hlab/grid.hpp"
#include "hlab/random_field.hpp"

namespace hlab {

/// Corrector fields for one realization at correlation length eps.
struct CorrectorBundle {
  SpectralField potential;              ///< V_eps = eps^-1 V(x/eps)
  SpectralField psi_eps;                ///< solves (-Delta + 1) psi + V_eps = 0; real
  std::vector<SpectralField> grad_psi;  ///< grad psi_eps = (grad psi^eps)(x/eps)
  SpectralField chi_eps;                ///< (i/eps) psi_eps; purely imaginary
  double eps = 1.0;
  std::uint64_t seed = 0;
  double residual = 0.0;  ///< relative L2 residual of the corrector equation

  const TorusGrid& grid() const noexcept { return psi_eps.grid(); }
  /// |grad psi_eps|^2 averaged over the torus.
  double mean_gradient_energy() const;
};

CorrectorBundle solve_corrector(const FieldRealization& realization);

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Space-and-ensemble average of |grad psi_eps|^2; tends to rho as eps -> 0.
/// Requires at least 8 bundles sharing one eps.
Estimate rho_empirical(std::span<const CorrectorBundle> bundles);

struct HomogSolution {
  SpectralField u0;
  double rho_used = 0.0;
  SpectralField source;
};

/// Exact diagonal solve of -Delta u + (1 + rho) u = f.
HomogSolution solve_homogenized(const SpectralField& f, double rho);

struct Expansion {
  SpectralField u1;            ///< -chi_eps u0
  SpectralField residual_rhs;  ///< (rho - i V(x/eps) chi) u0 - eps (chi Lap u0 + 2 grad chi . grad u0)
};

/// First-order expansion u0 + eps u1 and the source that
/// (Delta - 1 + i V_eps)(u0 + eps u1 - u_eps) equals.
Expansion expansion(const HomogSolution& u0, const CorrectorBundle& bundle);

/// Smooth compactly supported bump exp(-1 / (1 - |x-c|^2 / r^2)) centred in
/// the torus with r = L/4.
SpectralField default_source(const TorusGrid& grid);

}  // namespace hlab
