#include "hlab/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

#include "hlab/errors.hpp"

namespace hlab {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// FFTW planning is not thread safe; execution with new-array execute is.
// ESTIMATE plans are reproducible across runs, which keeps campaign output
// byte-stable.
fftw_plan cached_plan(int dim, int n, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(plan_mutex());
  auto key = std::make_tuple(dim, n, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<int> dims(static_cast<std::size_t>(dim), n);
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
  auto* buf = fftw_alloc_complex(total);
  fftw_plan p = fftw_plan_dft(dim, dims.data(), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  plans.emplace(key, p);
  return p;
}

std::shared_ptr<const std::vector<double>> cached_k2(const TorusGrid& g) {
  static std::map<std::tuple<int, int, double>, std::weak_ptr<const std::vector<double>>> cache;
  static std::mutex m;
  std::lock_guard lock(m);
  auto key = std::make_tuple(g.dim(), g.points_per_axis(), g.length());
  if (auto it = cache.find(key); it != cache.end()) {
    if (auto sp = it->second.lock()) return sp;
  }
  auto v = std::make_shared<std::vector<double>>(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double k = g.wavevector(i, a);
      s += k * k;
    }
    (*v)[i] = s;
  }
  cache[key] = v;
  return v;
}

void require_same_grid(const SpectralField& a, const SpectralField& b) {
  if (!(a.grid() == b.grid())) throw IncompatibleInputs("fields live on different grids");
}

}  // namespace

TorusGrid::TorusGrid(int dim, int n, double length) : dim_(dim), n_(n), length_(length) {
  if (dim < 1) throw std::invalid_argument("grid dimension must be >= 1");
  if (n < 2 || (n & (n - 1)) != 0) throw std::invalid_argument("points per axis must be a power of two >= 2");
  if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("grid length must be positive");
  size_ = 1;
  for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(n);
  k2_ = cached_k2(*this);
}

double TorusGrid::cell_volume() const noexcept { return std::pow(spacing(), dim_); }
double TorusGrid::volume() const noexcept { return std::pow(length_, dim_); }
double TorusGrid::wave_step() const noexcept { return 2.0 * std::numbers::pi / length_; }

std::size_t TorusGrid::stride(int axis) const noexcept {
  std::size_t s = 1;
  for (int a = axis + 1; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
  return s;
}

std::size_t TorusGrid::conjugate_slot(std::size_t linear) const noexcept {
  std::size_t out = 0;
  for (int a = 0; a < dim_; ++a) {
    const int i = axis_index(linear, a);
    const int j = (n_ - i) % n_;
    out += static_cast<std::size_t>(j) * stride(a);
  }
  return out;
}

bool TorusGrid::on_nyquist_plane(std::size_t linear) const noexcept {
  for (int a = 0; a < dim_; ++a)
    if (axis_index(linear, a) == n_ / 2) return true;
  return false;
}

std::span<const double> TorusGrid::k_squared() const { return *k2_; }

void check_resolution(const TorusGrid& grid, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double per_length = eps * grid.points_per_axis() / grid.length();
  if (per_length < 8.0 * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "under-resolved correlation length: eps*n/L = " << per_length << " < 8";
    throw UnderResolved(os.str());
  }
}

void fft_forward(const TorusGrid& grid, std::span<cplx> data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cached_plan(grid.dim(), grid.points_per_axis(), FFTW_FORWARD), p, p);
}

void fft_inverse(const TorusGrid& grid, std::span<cplx> data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cached_plan(grid.dim(), grid.points_per_axis(), FFTW_BACKWARD), p, p);
  const double s = 1.0 / static_cast<double>(grid.size());
  for (auto& v : data) v *= s;
}

// ---------------------------------------------------------------------------

SpectralField::SpectralField(TorusGrid grid, Representation rep)
    : grid_(std::move(grid)), rep_(rep), values_(grid_.size(), cplx{0.0, 0.0}) {}

SpectralField::SpectralField(TorusGrid grid, std::vector<cplx> values, Representation rep)
    : grid_(std::move(grid)), rep_(rep), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw std::invalid_argument("value count does not match grid size");
}

SpectralField SpectralField::from_function(const TorusGrid& grid,
                                           const std::function<cplx(std::span<const double>)>& fn) {
  std::vector<cplx> v(grid.size());
  std::vector<double> x(static_cast<std::size_t>(grid.dim()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (int a = 0; a < grid.dim(); ++a) x[static_cast<std::size_t>(a)] = grid.coordinate(i, a);
    v[i] = fn(x);
  }
  return SpectralField(grid, std::move(v), Representation::nodal);
}

SpectralField SpectralField::plane_wave(const TorusGrid& grid, std::span<const int> modes) {
  if (static_cast<int>(modes.size()) != grid.dim()) throw std::invalid_argument("mode vector has wrong dimension");
  const double dk = grid.wave_step();
  return from_function(grid, [&](std::span<const double> x) {
    double phase = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) phase += dk * modes[a] * x[a];
    return std::polar(1.0, phase);
  });
}

SpectralField SpectralField::to_spectral() const {
  if (rep_ == Representation::spectral) return *this;
  std::vector<cplx> v = values_;
  fft_forward(grid_, v);
  return SpectralField(grid_, std::move(v), Representation::spectral);
}

SpectralField SpectralField::to_nodal() const {
  if (rep_ == Representation::nodal) return *this;
  std::vector<cplx> v = values_;
  fft_inverse(grid_, v);
  return SpectralField(grid_, std::move(v), Representation::nodal);
}

bool SpectralField::is_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

double SpectralField::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& z : values_) m = std::max(m, std::abs(z));
  return m;
}

double SpectralField::imaginary_fraction() const {
  const SpectralField nodal = to_nodal();
  double im = 0.0, mag = 0.0;
  for (const auto& z : nodal.values_) {
    im = std::max(im, std::abs(z.imag()));
    mag = std::max(mag, std::abs(z));
  }
  return mag > 0.0 ? im / mag : 0.0;
}

cplx SpectralField::mean() const {
  if (rep_ == Representation::spectral) return values_[0] / static_cast<double>(grid_.size());
  cplx s{0.0, 0.0};
  for (const auto& z : values_) s += z;
  return s / static_cast<double>(grid_.size());
}

SpectralField operator+(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b);
  const SpectralField bb = b.as(a.representation());
  std::vector<cplx> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bb.values()[i];
  return SpectralField(a.grid(), std::move(v), a.representation());
}

SpectralField operator-(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b);
  const SpectralField bb = b.as(a.representation());
  std::vector<cplx> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= bb.values()[i];
  return SpectralField(a.grid(), std::move(v), a.representation());
}

SpectralField operator*(cplx s, const SpectralField& a) {
  std::vector<cplx> v(a.values().begin(), a.values().end());
  for (auto& z : v) z *= s;
  return SpectralField(a.grid(), std::move(v), a.representation());
}

SpectralField pointwise(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b);
  const SpectralField an = a.to_nodal();
  const SpectralField bn = b.to_nodal();
  std::vector<cplx> v(an.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = an.values()[i] * bn.values()[i];
  return SpectralField(a.grid(), std::move(v), Representation::nodal);
}

SpectralField real_part(const SpectralField& a) {
  const SpectralField an = a.to_nodal();
  std::vector<cplx> v(an.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = an.values()[i].real();
  return SpectralField(a.grid(), std::move(v), Representation::nodal);
}

SpectralField conj(const SpectralField& a) {
  const SpectralField an = a.to_nodal();
  std::vector<cplx> v(an.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::conj(an.values()[i]);
  return SpectralField(a.grid(), std::move(v), Representation::nodal);
}

SpectralField apply_multiplier(const SpectralField& field, const Symbol& symbol) {
  const TorusGrid& g = field.grid();
  std::vector<cplx> v = field.to_spectral().release();
  std::vector<double> k(static_cast<std::size_t>(g.dim()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int a = 0; a < g.dim(); ++a) k[static_cast<std::size_t>(a)] = g.wavevector(i, a);
    const cplx s = symbol(k);
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      std::ostringstream os;
      os << "singular symbol at k = (";
      for (std::size_t a = 0; a < k.size(); ++a) os << (a ? ", " : "") << k[a];
      os << ")";
      throw SingularSymbol(os.str());
    }
    v[i] *= s;
  }
  SpectralField out(g, std::move(v), Representation::spectral);
  return field.representation() == Representation::nodal ? out.to_nodal() : out;
}

SpectralField apply_radial_multiplier(const SpectralField& field, const RadialSymbol& symbol,
                                      bool mask_zero_mode) {
  const TorusGrid& g = field.grid();
  std::vector<cplx> v = field.to_spectral().release();
  const auto k2 = g.k_squared();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask_zero_mode && i == 0) {
      v[i] = 0.0;
      continue;
    }
    const cplx s = symbol(k2[i]);
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      std::ostringstream os;
      os << "singular symbol at k = (";
      for (int a = 0; a < g.dim(); ++a) os << (a ? ", " : "") << g.wavevector(i, a);
      os << ")";
      throw SingularSymbol(os.str());
    }
    v[i] *= s;
  }
  SpectralField out(g, std::move(v), Representation::spectral);
  return field.representation() == Representation::nodal ? out.to_nodal() : out;
}

std::vector<SpectralField> gradient(const SpectralField& field) {
  const TorusGrid& g = field.grid();
  const SpectralField spec = field.to_spectral();
  std::vector<SpectralField> out;
  out.reserve(static_cast<std::size_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) {
    std::vector<cplx> v(spec.values().begin(), spec.values().end());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= cplx{0.0, g.wavevector(i, a)};
    fft_inverse(g, v);
    out.emplace_back(g, std::move(v), Representation::nodal);
  }
  return out;
}

SpectralField laplacian(const SpectralField& field) {
  return apply_radial_multiplier(field, [](double k2) { return cplx{-k2, 0.0}; });
}

double norm(const SpectralField& field, NormKind kind) {
  const TorusGrid& g = field.grid();
  if (kind == NormKind::L2 && field.representation() == Representation::nodal) {
    double s = 0.0;
    for (const auto& z : field.values()) s += std::norm(z);
    return std::sqrt(g.cell_volume() * s);
  }
  const SpectralField spec = field.to_spectral();
  const auto k2 = g.k_squared();
  double s = 0.0;
  const auto v = spec.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = kind == NormKind::L2 ? 1.0 : kind == NormKind::H1 ? 1.0 + k2[i] : 1.0 / (1.0 + k2[i]);
    s += w * std::norm(v[i]);
  }
  return std::sqrt(g.cell_volume() * s / static_cast<double>(g.size()));
}

double norm(std::span<const SpectralField> components) {
  double s = 0.0;
  for (const auto& c : components) {
    const double n = norm(c, NormKind::L2);
    s += n * n;
  }
  return std::sqrt(s);
}

cplx inner(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a, b);
  const SpectralField an = a.to_nodal();
  const SpectralField bn = b.to_nodal();
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < an.size(); ++i) s += an.values()[i] * std::conj(bn.values()[i]);
  return a.grid().cell_volume() * s;
}

SpectralField rescale_argument(const SpectralField& unit_field, double eps) {
  check_resolution(unit_field.grid(), eps);
  return cplx{1.0 / eps, 0.0} * unit_field;
}

}  // namespace hlab
