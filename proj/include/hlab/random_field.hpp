#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hlab/grid.hpp"

namespace hlab {

enum class SpectrumFamily { band_limited_flat, gaussian_bump, power_law_cutoff };
enum class SynthesisMode { gaussian, random_phase };

std::string to_string(SpectrumFamily f);
std::string to_string(SynthesisMode m);
SpectrumFamily parse_family(const std::string& s);
SynthesisMode parse_mode(const std::string& s);

/// Isotropic power spectrum R_hat(|xi|) of the unit-scale potential, with
/// R(x) = int exp(i xi.x) R_hat(xi) dxi and R(0) = sigma2.
///
///   band-limited-flat   R_hat = c            for |xi| <= k_max
///   gaussian-bump       R_hat = sigma2 (2 pi k_max^2)^(-d/2) exp(-|xi|^2 / (2 k_max^2))
///   power-law-cutoff    R_hat = A |xi|^(gamma - d)   for |xi| <= k_max
///
/// with c and A fixed by the variance.
struct SpectrumModel {
  SpectrumFamily family = SpectrumFamily::band_limited_flat;
  double sigma2 = 1.0;
  double k_max = 2.0 * std::numbers::pi;
  double gamma = 3.0;

  double density(double r, int dim) const;
  /// Analytic R(r) for the flat and Gaussian families; radial quadrature
  /// for the power law.
  double correlation(double r, int dim) const;
  /// Radius beyond which the density is zero (or below 1e-30 of its peak).
  double support_radius() const;
  void validate() const;
};

/// Surface area of the unit sphere in R^d.
double unit_sphere_area(int dim);

/// Per-slot variance R_hat(eps |k|) (2 pi eps / L)^d of the spectral
/// synthesis; the k = 0 slot is zero.
std::vector<double> spectral_weights(const SpectrumModel& model, const TorusGrid& grid, double eps);

/// Exact lattice correlation sum_k S_k cos(k.x) at every lag x, nodal.
SpectralField lattice_correlation(const TorusGrid& grid, std::span<const double> weights);

/// One seeded sample of V(x / eps) on the physical grid.
struct FieldRealization {
  SpectralField potential;  ///< V(x/eps), real-valued, nodal
  double eps = 1.0;
  std::uint64_t seed = 0;
  SynthesisMode mode = SynthesisMode::gaussian;
  double lattice_variance = 0.0;  ///< sum of the spectral weights
  /// Almost-sure bound sqrt(2 sigma^2 M) in random-phase mode; +inf for Gaussian fields.
  double amplitude_bound = std::numeric_limits<double>::infinity();

  const TorusGrid& grid() const noexcept { return potential.grid(); }
  /// eps^-1 V(x/eps).
  SpectralField scaled_potential() const { return rescale_argument(potential, eps); }
};

inline constexpr int kDefaultRandomPhaseModes = 512;

FieldRealization synthesize(const SpectrumModel& model, const TorusGrid& grid, double eps, std::uint64_t seed,
                            SynthesisMode mode, int modes = kDefaultRandomPhaseModes);

/// Synthesis from explicit per-slot weights (must be symmetric under k -> -k).
FieldRealization synthesize_from_weights(const TorusGrid& grid, std::span<const double> weights, double eps,
                                         std::uint64_t seed, SynthesisMode mode,
                                         int modes = kDefaultRandomPhaseModes);

struct CorrelationTable {
  std::vector<double> radius;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::vector<std::size_t> count;  ///< lattice lags per bin
};

/// Ensemble- and shift-averaged E{V(0) V(x)}, binned by minimal-image
/// distance in bins of width h. Bin 0 holds the lag x = 0 only.
CorrelationTable empirical_correlation(std::span<const FieldRealization> fields);

/// Continuum rho = int R_hat(xi) / |xi|^2 dxi by adaptive radial quadrature.
double rho_spectral(const SpectrumModel& model, int dim);
/// On-grid rho_disc = sum_{k != 0} S_k / (eps |k|)^2 at correlation length eps.
double rho_discrete(const SpectrumModel& model, const TorusGrid& grid, double eps);

struct AdmissibilityReport {
  bool rho_finite = false;
  bool s_condition = false;
  double witness_s = 0.0;
  double weighted_integral = std::numeric_limits<double>::infinity();
};

/// Evaluates int (1 + |xi|^(2s)) |xi|^-2 R_hat dxi at s = (d-2)/4 + 1/2.
AdmissibilityReport check_admissibility(const SpectrumModel& model, int dim);

struct Quadruple {
  std::array<std::size_t, 4> nodes{};
};

struct FourthMomentRow {
  double moment = 0.0;          ///< empirical E{V1 V2 V3 V4}
  double moment_stderr = 0.0;
  double residual = 0.0;        ///< moment - R12 R34
  double isserlis = 0.0;        ///< R13 R24 + R14 R23
  double eta_bound = 0.0;       ///< eta13 eta24 + eta14 eta23 with eta = |R|
};

struct MixingDiagnostics {
  std::function<double(double)> eta;  ///< radial |R| profile
  double eta_radial_integral = 0.0;   ///< int_0^rmax eta(r) |S^{d-1}| r^(d-1) dr on the lattice bins
  std::vector<FourthMomentRow> rows;
};

inline constexpr std::size_t kMinFourthMomentEnsemble = 256;

/// Empirical fourth-moment residual against the pair correlation
/// `lag_correlation` (see lattice_correlation). Requires >= 256 fields.
MixingDiagnostics fourth_moment_residual(std::span<const FieldRealization> fields,
                                         std::span<const Quadruple> quadruples,
                                         const SpectralField& lag_correlation);

}  // namespace hlab
