#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hlab/corrector.hpp"
#include "hlab/fit.hpp"
#include "hlab/grid.hpp"
#include "hlab/random_field.hpp"

namespace hlab {

/// Fundamental solution of (-Delta + 1) on R^d,
///   G(r) = int_0^inf (4 pi t)^(-d/2) exp(-r^2 / (4t) - t) dt,
/// which reduces to exp(-r) / (4 pi r) at d = 3.
class GreenKernel {
 public:
  explicit GreenKernel(int dim = 3);

  int dim() const noexcept { return dim_; }
  /// Closed form at d = 3, heat-kernel quadrature otherwise.
  double value(double r) const;
  double quadrature_value(double r) const;
  /// dG/dr; |grad G| = -dG/dr.
  double radial_derivative(double r) const;

  /// Periodized kernel on the torus: inverse transform of (|k|^2 + 1)^-1,
  /// scaled by 1/h^d so it approximates G summed over all periodic images.
  static SpectralField on_grid(const TorusGrid& grid);
  /// Sum of G over periodic images x + L j with |j_a| <= images.
  double periodized(std::span<const double> x, double length, int images = 3) const;

 private:
  int dim_;
};

struct GreenBoundRow {
  double radius = 0.0;
  double lhs = 0.0;    ///< G(r) r + |grad G|(r)
  double bound = 0.0;  ///< C exp(-nu r) / r^(d-1)
  double ratio = 0.0;
};

struct GreenBoundReport {
  double nu = 0.9;
  double constant = 0.0;
  double max_ratio = 0.0;
  std::vector<GreenBoundRow> rows;
};

inline constexpr double kGreenDecayRate = 0.9;

/// Evaluates G r + |grad G| against C exp(-nu r) / r^(d-1). With
/// `fit_radius` > 0, C is matched at that radius; otherwise C is the
/// smallest constant valid on all of (0, inf), found by a dense sweep.
/// Throws std::invalid_argument("singular point excluded") on r <= 0.
GreenBoundReport green_bound_check(const GreenKernel& kernel, std::span<const double> radii,
                                   double nu = kGreenDecayRate, double fit_radius = 0.0);

enum class ConvolutionRegime { above, critical, below };
std::string to_string(ConvolutionRegime r);
ConvolutionRegime classify(double alpha, double beta, int dim);

struct ConvolutionCase {
  int dim = 3;
  double alpha = 2.0;
  double beta = 2.0;
  double lambda = 1.0;
  double separation = 1.0;
};

struct ConvolutionResult {
  ConvolutionCase input;
  ConvolutionRegime regime = ConvolutionRegime::above;
  double integral = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;  ///< exp(-lambda s) times the regime factor
  double ratio = 0.0;
  double relative_stderr = 0.0;
  double effective_samples = 0.0;
};

/// Regime factor multiplying exp(-lambda s):
///   alpha + beta > d   s^(d - alpha - beta) + 1
///   alpha + beta = d   |ln s| + 1
///   alpha + beta < d   1
double regime_factor(ConvolutionRegime regime, double alpha, double beta, int dim, double separation);

inline constexpr std::size_t kLemmaSamples = 1'000'000;

/// int exp(-lambda|z-x|) |z-x|^-alpha exp(-lambda|z-y|) |z-y|^-beta dz by
/// Monte Carlo with a 50/50 mixture of radial Gamma proposals centred at x
/// and y. Throws InsufficientSamples when the effective sample size falls
/// below 1% of the draws.
ConvolutionResult convolution_lemma_check(const ConvolutionCase& c, std::uint64_t seed = 1,
                                          std::size_t samples = kLemmaSamples);

struct MomentLevel {
  double eps = 0.0;
  double l2_sq = 0.0;  ///< ensemble mean of ||f_eps||^2
  double l2_sq_stderr = 0.0;
  double grad_sq = 0.0;  ///< ensemble mean of ||grad f_eps||^2
  double grad_sq_stderr = 0.0;
  double source_mean = 0.0;  ///< |ensemble mean of the spatial mean of rho - i V_eps chi_eps|
  double rho = 0.0;
  double max_construction_residual = 0.0;
  std::size_t seeds = 0;
};

struct MomentDiagnostic {
  std::vector<MomentLevel> levels;
  RateFit l2_fit;
  RateFit grad_fit;
  bool fitted = false;  ///< false when the ensemble means vanish
};

inline constexpr std::size_t kMinMomentSeeds = 16;

struct MomentOptions {
  SynthesisMode mode = SynthesisMode::gaussian;
  int modes = kDefaultRandomPhaseModes;
  /// Homogenized potential; negative selects rho_disc at every eps.
  double rho = -1.0;
};

/// f_eps = (-Delta + 1)^-1 ((rho - i V_eps chi_eps) u0) per realization, with
/// u0 solving the homogenized problem for source f. Seeds are reused at
/// every ladder level.
MomentDiagnostic feps_moments(const SpectrumModel& model, const TorusGrid& grid, std::span<const double> ladder,
                              std::span<const std::uint64_t> seeds, const SpectralField& f,
                              const MomentOptions& opts = {});

}  // namespace hlab
