#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sloaci/types.hpp"

namespace sloaci {

enum class KernelFamily { epanechnikov, gaussian, uniform };

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily family);

struct KernelSpec {
  KernelFamily family = KernelFamily::epanechnikov;
  /// Lower floor used by the stabilization device (k_lower).
  double stabilization_floor = 1e-4;
};

/// One-dimensional kernel profile K(u).
double kernel_profile(KernelFamily family, double u);

inline bool is_compact(KernelFamily family) { return family != KernelFamily::gaussian; }

/// c_h * n^(-1 / (2 beta + d)).
double bandwidth(double c_h, std::size_t n, double beta, std::size_t d);

/// Per-coordinate bandwidths for product kernels.
struct Bandwidth {
  std::array<double, kMaxDim> h{};
  std::size_t dim = 1;

  Bandwidth() = default;
  Bandwidth(double scalar, std::size_t d) : dim(d) { h.fill(scalar); }
};

struct RegressionSample {
  std::vector<Point> points;
  std::vector<double> responses;
  /// Empty means every point is included.
  std::vector<std::uint8_t> mask;

  void validate() const;
};

/// Nadaraya-Watson estimate at `x` with a product kernel. Returns 0 when the
/// kernel mass is zero. For compact kernels, when the kernel mass falls to
/// k_lower times the number of points inside the bandwidth box or below, the
/// estimate switches to the plain average over that box.
double nw_predict(const RegressionSample& sample, const KernelSpec& kernel, double h, const Point& x);
double nw_predict(const RegressionSample& sample, const KernelSpec& kernel, const Bandwidth& h, const Point& x);

/// Repeated-query Nadaraya-Watson regressor over a fixed sample with one or
/// more response columns sharing the same design points. Points are sorted
/// on the first coordinate so compact kernels only visit the bandwidth window.
class NwRegressor {
 public:
  NwRegressor() = default;
  /// `responses` is row-major with `columns` values per point.
  NwRegressor(std::span<const Point> points, std::span<const double> responses, std::size_t columns,
              const KernelSpec& kernel, const Bandwidth& h);

  std::size_t size() const { return first_.size(); }
  std::size_t columns() const { return columns_; }
  const Bandwidth& bandwidth() const { return h_; }

  /// Writes one estimate per response column into `out`.
  void predict(const Point& x, std::span<double> out) const;
  double predict(const Point& x, std::size_t column = 0) const;

 private:
  KernelSpec kernel_;
  Bandwidth h_;
  std::size_t columns_ = 1;
  std::vector<double> first_;   // sorted first coordinate
  std::vector<Point> points_;   // same order as first_
  std::vector<double> responses_;
};

}  // namespace sloaci
