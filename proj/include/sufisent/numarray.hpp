#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sufisent {

// Thrown when operand shapes do not line up. The message always names the
// offending shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for file / format / content problems in data ingestion.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produced or met non-finite values, or a numeric
// verification failed.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major array of doubles. Rank 1 = vector, rank 2 = matrix.
// Scalars are stored as shape [1].
struct NumArray {
  Shape shape;
  std::vector<double> data;

  NumArray() = default;

  explicit NumArray(Shape s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

  NumArray(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size()) {
      throw ShapeError("NumArray: shape " + shape_str(shape) + " does not match " +
                       std::to_string(data.size()) + " elements");
    }
  }

  static NumArray scalar(double v) { return NumArray({1}, {v}); }

  static NumArray vec(std::vector<double> d) {
    Shape s{d.size()};
    return NumArray(std::move(s), std::move(d));
  }

  static NumArray mat(std::size_t rows, std::size_t cols, std::vector<double> d) {
    return NumArray({rows, cols}, std::move(d));
  }

  static NumArray zeros(Shape s) { return NumArray(std::move(s)); }

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }
  bool is_vector() const { return shape.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  std::size_t rows() const {
    if (!is_matrix()) throw ShapeError("rows(): not a matrix, shape " + shape_str(shape));
    return shape[0];
  }
  std::size_t cols() const {
    if (!is_matrix()) throw ShapeError("cols(): not a matrix, shape " + shape_str(shape));
    return shape[1];
  }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const NumArray& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_finite(const char* what) const {
    if (!all_finite()) {
      throw NumericError(std::string(what) + ": non-finite value encountered");
    }
  }
};

inline double dot(const NumArray& a, const NumArray& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const NumArray& a) { return dot(a, a); }

inline double max_abs_diff(const NumArray& a, const NumArray& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const NumArray& a, const NumArray& b) {
  return a.shape == b.shape && a.data == b.data;
}

}  // namespace sufisent
