#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sloaci {

inline constexpr std::size_t kMaxDim = 4;

/// Covariate point of small fixed capacity. Built-in scenarios are
/// one-dimensional; the augmented-covariate baseline appends one surrogate
/// coordinate.
struct Point {
  std::array<double, kMaxDim> v{};
  std::size_t dim = 1;

  Point() = default;
  explicit Point(double x) : dim(1) { v[0] = x; }

  static Point of(std::initializer_list<double> xs) {
    if (xs.size() == 0 || xs.size() > kMaxDim)
      throw std::invalid_argument("Point: dimension must be in [1, 4]");
    Point p;
    p.dim = xs.size();
    std::size_t i = 0;
    for (double x : xs) p.v[i++] = x;
    return p;
  }

  double operator[](std::size_t i) const { return v[i]; }
  double& operator[](std::size_t i) { return v[i]; }

  /// Returns a copy with one more coordinate appended.
  Point extended(double extra) const {
    if (dim >= kMaxDim)
      throw std::invalid_argument("Point: cannot extend past kMaxDim");
    Point p = *this;
    p.v[p.dim++] = extra;
    return p;
  }

  friend bool operator==(const Point& a, const Point& b) {
    if (a.dim != b.dim) return false;
    for (std::size_t i = 0; i < a.dim; ++i)
      if (a.v[i] != b.v[i]) return false;
    return true;
  }
};

enum class Arm : std::uint8_t { control = 0, treated = 1 };

inline constexpr std::size_t index(Arm z) { return static_cast<std::size_t>(z); }
inline constexpr Arm arm_from_index(std::size_t i) { return i == 0 ? Arm::control : Arm::treated; }
inline constexpr std::array<Arm, 2> kArms{Arm::control, Arm::treated};

// ---------------------------------------------------------------------------
// Error hierarchy. Every module throws a subclass of Error so the harness can
// attach replication context without catching unrelated exceptions.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class SingularDesign : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::vector<std::pair<double, double>> grid)
      : Error(what), grid_(std::move(grid)) {}

  /// (argument, criterion) pairs evaluated before giving up.
  const std::vector<std::pair<double, double>>& grid() const noexcept { return grid_; }

 private:
  std::vector<std::pair<double, double>> grid_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ReplicationError : public Error {
 public:
  ReplicationError(std::size_t rep, std::size_t stage, const std::string& cause)
      : Error("replication " + std::to_string(rep) + ", stage " + std::to_string(stage) + ": " + cause),
        rep_(rep),
        stage_(stage) {}

  std::size_t rep() const noexcept { return rep_; }
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t rep_;
  std::size_t stage_;
};

}  // namespace sloaci
