// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semlab::util {

/// Raw little-endian IEEE-754 binary32 arrays.
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);

/// Throws IoError naming expected vs found byte counts on a size mismatch.
std::vector<float> read_f32_blob(const std::filesystem::path& path,
                                 std::size_t expected_count);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace semlab::util
