#pragma once

#include <span>

namespace hlab {

struct RatePoint {
  double eps = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  ///< log C in mean ~ C eps^slope
  double ci = 0.0;         ///< 95% half-width on the slope
  bool weighted = false;
  double rms_residual = 0.0;  ///< RMS of log residuals of the power fit
  // Alternative one-parameter model mean = C eps sqrt(|ln eps|).
  double log_corrected_log_c = 0.0;
  double log_corrected_rms = 0.0;
};

/// Least squares on (log eps, log mean), weighted by (mean / stderr)^2 when
/// every point carries a positive standard error. Needs >= 3 points with
/// positive means; throws DegenerateFit otherwise.
RateFit fit_rate(std::span<const RatePoint> points);

}  // namespace hlab
