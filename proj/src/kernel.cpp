#include "sloaci/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sloaci {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Accumulates kernel mass and box counts for one query; shared between the
/// reference predictor and the sorted regressor so both apply the same rule.
struct Accumulator {
  double mass = 0.0;
  std::size_t box_count = 0;
  double weighted[kMaxDim] = {};  // one slot per response column (<= kMaxDim)
  double box_sum[kMaxDim] = {};

  void add(double w, bool in_box, const double* r, std::size_t columns) {
    mass += w;
    for (std::size_t c = 0; c < columns; ++c) weighted[c] += w * r[c];
    if (in_box) {
      ++box_count;
      for (std::size_t c = 0; c < columns; ++c) box_sum[c] += r[c];
    }
  }

  void finish(const KernelSpec& kernel, std::size_t columns, double* out) const {
    const bool stabilize = is_compact(kernel.family) &&
                           mass <= kernel.stabilization_floor * static_cast<double>(box_count);
    for (std::size_t c = 0; c < columns; ++c) {
      if (stabilize) {
        // The uniform replacement kernel is constant on the box, so its scale cancels.
        out[c] = box_count == 0 ? 0.0 : box_sum[c] / static_cast<double>(box_count);
      } else {
        out[c] = mass == 0.0 ? 0.0 : weighted[c] / mass;
      }
    }
  }
};

inline void weigh(KernelFamily family, const Bandwidth& h, const Point& x, const Point& p, double& w,
                  bool& in_box) {
  w = 1.0;
  in_box = true;
  for (std::size_t k = 0; k < h.dim; ++k) {
    const double u = (x[k] - p[k]) / h.h[k];
    if (std::abs(u) > 1.0) in_box = false;
    w *= kernel_profile(family, u);
  }
}

}  // namespace

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "uniform") return KernelFamily::uniform;
  throw InvalidInput("unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::uniform: return "uniform";
  }
  return "?";
}

double kernel_profile(KernelFamily family, double u) {
  switch (family) {
    case KernelFamily::epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::uniform:
      return std::abs(u) <= 1.0 ? 1.0 : 0.0;
    case KernelFamily::gaussian:
      return kInvSqrt2Pi * std::exp(-0.5 * u * u);
  }
  return 0.0;
}

double bandwidth(double c_h, std::size_t n, double beta, std::size_t d) {
  if (n == 0) throw InvalidInput("bandwidth: n must be positive");
  if (!(beta > 0.0) || d == 0) throw InvalidInput("bandwidth: beta > 0 and d >= 1 required");
  return c_h * std::pow(static_cast<double>(n), -1.0 / (2.0 * beta + static_cast<double>(d)));
}

void RegressionSample::validate() const {
  if (points.size() != responses.size()) throw InvalidInput("RegressionSample: points/responses length mismatch");
  if (!mask.empty() && mask.size() != points.size())
    throw InvalidInput("RegressionSample: mask length must equal points length");
}

double nw_predict(const RegressionSample& sample, const KernelSpec& kernel, double h, const Point& x) {
  return nw_predict(sample, kernel, Bandwidth(h, x.dim), x);
}

double nw_predict(const RegressionSample& sample, const KernelSpec& kernel, const Bandwidth& h, const Point& x) {
  sample.validate();
  for (std::size_t k = 0; k < h.dim; ++k)
    if (!(h.h[k] > 0.0)) throw InvalidInput("nw_predict: bandwidth must be positive");
  Accumulator acc;
  for (std::size_t j = 0; j < sample.points.size(); ++j) {
    if (!sample.mask.empty() && !sample.mask[j]) continue;
    double w;
    bool in_box;
    weigh(kernel.family, h, x, sample.points[j], w, in_box);
    acc.add(w, in_box, &sample.responses[j], 1);
  }
  double out;
  acc.finish(kernel, 1, &out);
  return out;
}

NwRegressor::NwRegressor(std::span<const Point> points, std::span<const double> responses, std::size_t columns,
                         const KernelSpec& kernel, const Bandwidth& h)
    : kernel_(kernel), h_(h), columns_(columns) {
  if (columns == 0 || columns > kMaxDim) throw InvalidInput("NwRegressor: 1..4 response columns supported");
  if (responses.size() != points.size() * columns) throw InvalidInput("NwRegressor: response size mismatch");
  for (std::size_t k = 0; k < h.dim; ++k)
    if (!(h.h[k] > 0.0)) throw InvalidInput("NwRegressor: bandwidth must be positive");

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a][0] < points[b][0]; });
  first_.reserve(order.size());
  points_.reserve(order.size());
  responses_.reserve(responses.size());
  for (std::size_t j : order) {
    first_.push_back(points[j][0]);
    points_.push_back(points[j]);
    for (std::size_t c = 0; c < columns; ++c) responses_.push_back(responses[j * columns + c]);
  }
}

void NwRegressor::predict(const Point& x, std::span<double> out) const {
  Accumulator acc;
  std::size_t begin = 0, end = first_.size();
  if (is_compact(kernel_.family)) {
    // Slightly widened so rounding at the box edge is decided by weigh(), as in nw_predict().
    const double h0 = h_.h[0] * (1.0 + 1e-9);
    begin = static_cast<std::size_t>(std::lower_bound(first_.begin(), first_.end(), x[0] - h0) - first_.begin());
    end = static_cast<std::size_t>(std::upper_bound(first_.begin(), first_.end(), x[0] + h0) - first_.begin());
  }
  for (std::size_t j = begin; j < end; ++j) {
    double w;
    bool in_box;
    weigh(kernel_.family, h_, x, points_[j], w, in_box);
    acc.add(w, in_box, &responses_[j * columns_], columns_);
  }
  acc.finish(kernel_, columns_, out.data());
}

double NwRegressor::predict(const Point& x, std::size_t column) const {
  double out[kMaxDim];
  predict(x, std::span<double>(out, columns_));
  return out[column];
}

}  // namespace sloaci
