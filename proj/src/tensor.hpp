#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ssk {

// Dense row-major float32 array. Shape dimensions are positive; an empty shape
// denotes a scalar (one element). A default-constructed tensor is the "absent"
// value (no shape, no data), used e.g. for bias tensors of bias-free models.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<float> d);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, float value);
  static Tensor of(std::vector<int> s, std::initializer_list<float> values);

  bool absent() const { return shape.empty() && data.empty(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data.size(); }

  float& at(int i) { return data[static_cast<std::size_t>(i)]; }
  float at(int i) const { return data[static_cast<std::size_t>(i)]; }
  // row-major accessors for common ranks
  float& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
  float at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
  float& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  float at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  float& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  float at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

// Throws ShapeMismatch with a message naming `what` when shapes differ.
void require_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what);

}  // namespace ssk
