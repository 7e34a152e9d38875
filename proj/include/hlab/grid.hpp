#pragma once

// Periodic torus discretization with exact Fourier-multiplier calculus.
//
// Nodal values live at x_j = j * h, h = L / n, in row-major order (last axis
// fastest). Spectral coefficients use the unnormalized forward transform
//   u_hat(k) = sum_x u(x) exp(-i k.x),
// and the inverse divides by the total number of points, so the nodal L2
// norm h^d sum |u|^2 equals (h^d / N) sum |u_hat|^2.

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hlab {

using cplx = std::complex<double>;

class TorusGrid {
 public:
  TorusGrid(int dim, int n, double length);

  int dim() const noexcept { return dim_; }
  int points_per_axis() const noexcept { return n_; }
  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return size_; }

  double spacing() const noexcept { return length_ / n_; }
  double cell_volume() const noexcept;
  double volume() const noexcept;
  /// Spacing 2*pi/L of the wavevector lattice.
  double wave_step() const noexcept;

  /// Signed mode number m in [-n/2, n/2) for an axis index.
  int mode(int axis_index) const noexcept { return axis_index < n_ / 2 ? axis_index : axis_index - n_; }

  std::size_t stride(int axis) const noexcept;
  int axis_index(std::size_t linear, int axis) const noexcept {
    return static_cast<int>((linear / stride(axis)) % static_cast<std::size_t>(n_));
  }

  /// Wavevector component k_axis of the spectral slot `linear`.
  double wavevector(std::size_t linear, int axis) const noexcept {
    return wave_step() * mode(axis_index(linear, axis));
  }

  /// Nodal coordinate x_axis of the node `linear`.
  double coordinate(std::size_t linear, int axis) const noexcept {
    return spacing() * axis_index(linear, axis);
  }

  /// Linear index of the slot holding -k (mod n) for the slot `linear`.
  std::size_t conjugate_slot(std::size_t linear) const noexcept;

  /// True when some component of the slot sits on the unpaired Nyquist mode -n/2.
  bool on_nyquist_plane(std::size_t linear) const noexcept;

  /// |k|^2 for every spectral slot, cached per grid.
  std::span<const double> k_squared() const;

  bool operator==(const TorusGrid& other) const noexcept {
    return dim_ == other.dim_ && n_ == other.n_ && length_ == other.length_;
  }

 private:
  int dim_;
  int n_;
  double length_;
  std::size_t size_;
  std::shared_ptr<const std::vector<double>> k2_;
};

/// Throws UnderResolved unless eps * n / L >= 8.
void check_resolution(const TorusGrid& grid, double eps);

/// In-place unnormalized forward transform.
void fft_forward(const TorusGrid& grid, std::span<cplx> data);
/// In-place inverse transform, normalized by 1/N.
void fft_inverse(const TorusGrid& grid, std::span<cplx> data);

enum class Representation { nodal, spectral };

/// Complex grid function tagged with its representation. Values are
/// immutable once constructed; every operation returns a new field.
class SpectralField {
 public:
  explicit SpectralField(TorusGrid grid, Representation rep = Representation::nodal);
  SpectralField(TorusGrid grid, std::vector<cplx> values, Representation rep);

  /// Samples `fn` at every node.
  static SpectralField from_function(const TorusGrid& grid,
                                     const std::function<cplx(std::span<const double>)>& fn);
  static SpectralField plane_wave(const TorusGrid& grid, std::span<const int> modes);

  const TorusGrid& grid() const noexcept { return grid_; }
  Representation representation() const noexcept { return rep_; }
  std::span<const cplx> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  SpectralField to_spectral() const;
  SpectralField to_nodal() const;
  SpectralField as(Representation rep) const { return rep == Representation::nodal ? to_nodal() : to_spectral(); }

  bool is_finite() const noexcept;
  double max_abs() const noexcept;
  /// Max |Im u| over nodes relative to max |u|; zero fields report 0.
  double imaginary_fraction() const;
  /// Spatial mean (h^d/L^d) sum u.
  cplx mean() const;

  /// Move the storage out; used by solvers that work on raw buffers.
  std::vector<cplx> release() && { return std::move(values_); }

 private:
  TorusGrid grid_;
  Representation rep_;
  std::vector<cplx> values_;
};

SpectralField operator+(const SpectralField& a, const SpectralField& b);
SpectralField operator-(const SpectralField& a, const SpectralField& b);
SpectralField operator*(cplx s, const SpectralField& a);
/// Pointwise product in nodal representation.
SpectralField pointwise(const SpectralField& a, const SpectralField& b);
/// Nodal real part (imaginary part zeroed).
SpectralField real_part(const SpectralField& a);
SpectralField conj(const SpectralField& a);

using Symbol = std::function<cplx(std::span<const double> k)>;
using RadialSymbol = std::function<cplx(double k_squared)>;

/// Multiplies spectral coefficients by symbol(k). Throws SingularSymbol on a
/// non-finite symbol value. Representation is preserved.
SpectralField apply_multiplier(const SpectralField& field, const Symbol& symbol);
/// Same for symbols depending only on |k|^2; `mask_zero_mode` forces the
/// k = 0 coefficient to 0 without evaluating the symbol there.
SpectralField apply_radial_multiplier(const SpectralField& field, const RadialSymbol& symbol,
                                      bool mask_zero_mode = false);

/// Spectral gradient, one nodal field per axis.
std::vector<SpectralField> gradient(const SpectralField& field);
SpectralField laplacian(const SpectralField& field);

enum class NormKind { L2, H1, Hminus1 };

double norm(const SpectralField& field, NormKind kind);
/// Vector L2 norm of a list of components.
double norm(std::span<const SpectralField> components);
/// h^d sum a * conj(b).
cplx inner(const SpectralField& a, const SpectralField& b);

/// x -> eps^-1 V(x / eps) for a field already sampled at correlation length
/// eps on the physical grid. Throws UnderResolved if eps * n / L < 8.
SpectralField rescale_argument(const SpectralField& unit_field, double eps);

}  // namespace hlab
