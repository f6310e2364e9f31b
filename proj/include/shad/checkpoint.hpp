#pragma once

// Binary checkpoint format: magic "SHAD", version u16, then per-entry
// records (u32 name length, name bytes, u32 rows, u32 cols, little-endian
// f64 payload). The loader rejects unknown magic or version.

#include <string>
#include <utility>
#include <vector>

#include "shad/matrix.hpp"

namespace shad {

constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Matrix*>>& entries);

std::vector<std::pair<std::string, Matrix>> load_checkpoint(const std::string& path);

} // namespace shad
