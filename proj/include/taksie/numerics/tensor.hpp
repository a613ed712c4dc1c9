#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace taksie::num {

std::string shape_string(std::span<const std::size_t> shape);

// Dense row-major array of doubles. Every dimension is positive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor from(std::span<const double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Matrix view helpers. A rank-1 tensor is a single row.
  std::size_t rows() const { return rank() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  void fill(double v);
  bool all_finite() const;
  std::string shape_string() const { return taksie::num::shape_string(shape_); }

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Ordered name -> tensor map with a format version. Insertion order is the
// serialization order, so two sets built the same way serialize identically.
class ParameterSet {
 public:
  explicit ParameterSet(int version = 1);

  Tensor& add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t count() const { return entries_.size(); }
  std::size_t parameter_count() const;
  int version() const { return version_; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  void set_zero();
  bool all_finite() const;
  // Adds `other` (same layout) scaled by `scale` into this set.
  void accumulate(const ParameterSet& other, double scale = 1.0);
  bool same_layout(const ParameterSet& other) const;

  // Entries whose names start with `prefix`, in order.
  ParameterSet subset(std::string_view prefix) const;
  // Appends every entry of `other`; names must not collide.
  void merge(const ParameterSet& other);

  bool operator==(const ParameterSet& other) const;

 private:
  int version_;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace taksie::num
