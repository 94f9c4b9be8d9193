#pragma once

#include <filesystem>

#include "d4am/param_vector.hpp"

namespace d4am {

// Binary layout, all little-endian:
//   offset  size  field
//   0       8     magic "D4AMCKPT"
//   8       4     version (uint32, currently 1)
//   12      4     reserved (0)
//   16      8     P, number of values (uint64)
//   24      8*P   values (IEEE-754 float64)
//   24+8P   4     CRC-32 of bytes [0, 24+8P)

void save_checkpoint(const ParamVector& theta, const std::filesystem::path& path);

/// Throws IoError on a missing, truncated, or corrupted file.
ParamVector load_checkpoint(const std::filesystem::path& path);

}  // namespace d4am
