#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace soma {

/// What a single component of a state is.
enum class ComponentKind { Binary, Scalar, Vector };

/// A point in component space X: one component's coordinates.
using Point = std::vector<double>;

/// n exchangeable components stored contiguously with a fixed stride.
class State {
 public:
  State() = default;
  State(std::size_t n, std::size_t width) : n_(n), width_(width), data_(n * width, 0.0) {}
  State(std::size_t n, std::size_t width, std::vector<double> data)
      : n_(n), width_(width), data_(std::move(data)) {
    assert(data_.size() == n_ * width_);
  }

  /// Scalar-component convenience constructor.
  static State scalars(std::vector<double> values) {
    const auto n = values.size();
    return State(n, 1, std::move(values));
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t width() const noexcept { return width_; }

  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * width_, width_};
  }
  std::span<double> operator[](std::size_t i) { return {data_.data() + i * width_, width_}; }

  void set(std::size_t i, std::span<const double> point) {
    assert(point.size() == width_);
    std::copy(point.begin(), point.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * width_));
  }

  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> flat() noexcept { return data_; }

  bool component_equal(std::size_t i, const State& other, std::size_t j) const {
    const auto a = (*this)[i];
    const auto b = other[j];
    return std::equal(a.begin(), a.end(), b.begin());
  }

  friend bool operator==(const State&, const State&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Number of positions where two equal-shaped states differ.
inline std::size_t hamming_distance(const State& a, const State& b) {
  assert(a.size() == b.size() && a.width() == b.width());
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.component_equal(i, b, i)) ++d;
  }
  return d;
}

}  // namespace soma
