#include "hlab/fit.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "hlab/errors.hpp"

namespace hlab {

RateFit fit_rate(std::span<const RatePoint> points) {
  if (points.size() < 3) throw DegenerateFit("degenerate fit input: need at least 3 ladder points");
  std::vector<double> x, y, w;
  bool weighted = true;
  for (const auto& p : points) {
    if (!(p.mean > 0.0) || !std::isfinite(p.mean) || !(p.eps > 0.0))
      throw DegenerateFit("degenerate fit input: non-positive mean or eps");
    x.push_back(std::log(p.eps));
    y.push_back(std::log(p.mean));
    if (!(p.stderr_ > 0.0)) weighted = false;
    w.push_back(p.stderr_ > 0.0 ? (p.mean / p.stderr_) * (p.mean / p.stderr_) : 1.0);
  }
  if (!weighted) std::fill(w.begin(), w.end(), 1.0);

  const std::size_t n = x.size();
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) throw DegenerateFit("degenerate fit input: all eps values coincide");

  RateFit fit;
  fit.weighted = weighted;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;

  double rss = 0.0, rss_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
    rss_w += w[i] * r * r;
  }
  fit.rms_residual = std::sqrt(rss / static_cast<double>(n));

  const double dof = static_cast<double>(n) - 2.0;
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  if (weighted) {
    // Known variances; inflate by the reduced chi-square when the scatter
    // exceeds the quoted errors.
    const double scale = std::max(1.0, rss_w / dof);
    fit.ci = t * std::sqrt(scale / sxx);
  } else {
    fit.ci = t * std::sqrt(rss / dof / sxx);
  }

  double acc = 0.0;
  std::vector<double> lc(n);
  for (std::size_t i = 0; i < n; ++i) {
    lc[i] = y[i] - std::log(points[i].eps * std::sqrt(std::abs(std::log(points[i].eps))));
    acc += lc[i];
  }
  fit.log_corrected_log_c = acc / static_cast<double>(n);
  double lrss = 0.0;
  for (double v : lc) lrss += (v - fit.log_corrected_log_c) * (v - fit.log_corrected_log_c);
  fit.log_corrected_rms = std::sqrt(lrss / static_cast<double>(n));
  return fit;
}

}  // namespace hlab
