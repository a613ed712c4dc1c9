#include "taksie/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace taksie::num {
namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_string(shape));
    n *= d;
  }
  return n;
}

}  // namespace

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(checked_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + taksie::num::shape_string(shape_));
  }
}

Tensor Tensor::from(std::span<const double> values) {
  return Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ParameterSet::ParameterSet(int version) : version_(version) {
  if (version < 1) throw std::invalid_argument("parameter set version must be >= 1");
}

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return entries_[it->second].second;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return entries_[it->second].second;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out(version_);
  for (const auto& [name, t] : entries_) out.add(name, Tensor(t.shape(), 0.0));
  return out;
}

void ParameterSet::set_zero() {
  for (auto& [name, t] : entries_) t.fill(0.0);
}

bool ParameterSet::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const auto& e) { return e.second.all_finite(); });
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
  }
  return true;
}

void ParameterSet::accumulate(const ParameterSet& other, double scale) {
  if (!same_layout(other)) throw std::invalid_argument("parameter sets have different layouts");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].second.data();
    auto src = other.entries_[i].second.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

ParameterSet ParameterSet::subset(std::string_view prefix) const {
  ParameterSet out(version_);
  for (const auto& [name, t] : entries_) {
    if (std::string_view(name).substr(0, prefix.size()) == prefix) out.add(name, t);
  }
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, t] : other.entries_) add(name, t);
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  return version_ == other.version_ && entries_ == other.entries_;
}

}  // namespace taksie::num
