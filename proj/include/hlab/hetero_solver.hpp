#pragma once

#include <cstdint>
#include <vector>

#include "hlab/corrector.hpp"
#include "hlab/grid.hpp"
#include "hlab/random_field.hpp"

namespace hlab {

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 500;
  int restart = 40;

  void validate() const;
};

/// Discrete energy identities of the solved equation, with
/// <a, b> = h^d sum a conj(b):
///   ||u||_H1^2               = Re <f, u>
///   -h^d sum V_eps |u|^2     = Im <f, u>
struct EnergyReport {
  double h1_energy = 0.0;       ///< ||u||_H1^2
  cplx source_pairing{};        ///< <f, u>
  double potential_energy = 0.0;  ///< -h^d sum V_eps |u|^2
  double h1_norm = 0.0;
  double source_hminus1 = 0.0;

  /// |h1_energy - Re<f,u>| / h1_energy.
  double real_identity_error() const;
  /// |potential_energy - Im<f,u>| / |<f,u>|.
  double imag_balance_error() const;
  /// ||u||_H1 <= ||f||_H-1 (1 + 10 tol).
  bool apriori_holds(double tol) const { return h1_norm <= source_hminus1 * (1.0 + 10.0 * tol); }
};

struct HeteroSolution {
  SpectralField u_eps;
  std::uint64_t seed = 0;
  int iterations = 0;
  double residual = 0.0;  ///< ||(-Delta + 1 - i V_eps) u - f|| / ||f||
  EnergyReport energy;
  std::vector<double> residual_history;  ///< true relative residual after each restart cycle
};

/// Restarted GMRES on (-Delta + 1 - i V_eps) u = f, left-preconditioned by the
/// exact (-Delta + 1)^-1 multiplier. Throws SolverStagnation when the true
/// residual is still above tolerance after max_iterations matrix-vector
/// products.
HeteroSolution solve_hetero(const FieldRealization& realization, const SpectralField& f, const SolverConfig& cfg);
/// Same, with the scaled potential V_eps given directly.
HeteroSolution solve_hetero(const SpectralField& potential, const SpectralField& f, const SolverConfig& cfg,
                            std::uint64_t seed = 0);

/// Applies (-Delta + 1 - i V_eps) to u.
SpectralField apply_hetero_operator(const SpectralField& potential, const SpectralField& u);

struct ErrorMetrics {
  double l2_err = 0.0;          ///< ||u_eps - u0||
  double h1_exp_err = 0.0;      ///< ||u0 + eps u1 - u_eps||_H1
  double grad_corr_err = 0.0;   ///< ||grad u_eps - grad u0 + i u0 grad psi_eps||
  double eps_u1_l2 = 0.0;       ///< ||eps u1||
  double eps_grad_u1_l2 = 0.0;  ///< ||grad(eps u1)||
};

ErrorMetrics error_metrics(const HeteroSolution& u_eps, const HomogSolution& u0, const CorrectorBundle& bundle);

}  // namespace hlab
