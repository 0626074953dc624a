#include "tensor.hpp"

#include <sstream>

namespace ssk {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) fail(ErrorKind::InvalidArgument, "tensor shape dimension must be positive, got " + std::to_string(d));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_numel(shape), 0.0f) {}

Tensor::Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    fail(ErrorKind::ShapeMismatch, "tensor data length " + std::to_string(data.size()) +
                                       " does not match shape " + shape_str(shape));
}

Tensor Tensor::full(std::vector<int> s, float value) {
  Tensor t(std::move(s));
  for (auto& v : t.data) v = value;
  return t;
}

Tensor Tensor::of(std::vector<int> s, std::initializer_list<float> values) {
  return Tensor(std::move(s), std::vector<float>(values));
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

void require_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what) {
  if (t.shape != expected)
    fail(ErrorKind::ShapeMismatch,
         what + ": expected shape " + shape_str(expected) + ", got " + shape_str(t.shape));
}

}  // namespace ssk
