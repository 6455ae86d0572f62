#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace anchorplace {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Input that violates a documented invariant (scenario file, flags, placement).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: singular information matrix, range guard hit, solver breakdown.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dense rows x cols table indexed (anchor m, location k).
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, const T& fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  T& operator()(std::size_t m, std::size_t k) { return data_[m * cols_ + k]; }
  const T& operator()(std::size_t m, std::size_t k) const { return data_[m * cols_ + k]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const Grid&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Execution policy for the Monte Carlo kernels. Both paths use the same
/// fixed block decomposition, so their results are bit-identical.
enum class Execution { serial, parallel };

}  // namespace anchorplace
