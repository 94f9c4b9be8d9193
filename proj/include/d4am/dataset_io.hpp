#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "d4am/matrix.hpp"
#include "d4am/tasks.hpp"

namespace d4am {

// Matrix file, little-endian:
//   0   8    magic "D4AMMATX"
//   8   4    version (1)
//   12  4    reserved (0)
//   16  8    rows
//   24  8    cols
//   32  8*rows*cols  float64 values, row-major
//   end 4    CRC-32 of everything before it
//
// Label file: magic "D4AMLABL", version, reserved, u64 count, int32 values,
// CRC-32.

void save_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix(const std::filesystem::path& path);

void save_labels(std::span<const int> labels, const std::filesystem::path& path);
std::vector<int> load_labels(const std::filesystem::path& path);

nlohmann::json task_spec_to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const nlohmann::json& j);

/// Writes every split of `data` into `dir` plus a task.json sidecar holding
/// the TaskSpec, seed and split sizes.
void save_task_data(const TaskData& data, const std::filesystem::path& dir);

/// Inverse of save_task_data. Throws IoError on missing or damaged files and
/// DataError when the files disagree with the sidecar.
TaskData load_task_data(const std::filesystem::path& dir);

}  // namespace d4am
