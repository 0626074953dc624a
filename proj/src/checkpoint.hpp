// Model checkpoint container: magic + version + JSON header + named float32
// arrays in a fixed order. Byte-stable: save -> load -> save reproduces the
// file exactly.
#pragma once

#include <cstdint>
#include <string>

#include "model.hpp"

namespace ssk {

void save_checkpoint(const std::string& path, const Model& m, std::uint64_t train_seed = 0);
Model load_checkpoint(const std::string& path, std::uint64_t* train_seed = nullptr);

}  // namespace ssk
