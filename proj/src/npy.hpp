// NPY v1.0 read/write, little-endian float32 C-order only.
#pragma once

#include <iosfwd>
#include <string>

#include "tensor.hpp"

namespace ssk {

void write_npy(std::ostream& out, const Tensor& t);
void write_npy_file(const std::string& path, const Tensor& t);

// Reads one array starting at the current stream position; leaves the stream
// positioned just past the payload (so arrays can be embedded back to back).
Tensor read_npy(std::istream& in);
Tensor read_npy_file(const std::string& path);

}  // namespace ssk
