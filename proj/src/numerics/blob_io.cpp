// SPDX-License-Identifier: Apache-2.0
#include "semlab/util/blob_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "semlab/error.hpp"

namespace semlab::util {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t to_little(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::little) {
    return bits;
  } else {
    return ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) |
           ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
}

}  // namespace

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    words[i] = to_little(std::bit_cast<std::uint32_t>(values[i]));
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<float> read_f32_blob(const std::filesystem::path& path,
                                 std::size_t expected_count) {
  std::error_code ec;
  const auto found = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
  const std::uintmax_t expected = static_cast<std::uintmax_t>(expected_count) * 4;
  if (found != expected)
    throw IoError("blob '" + path.string() + "' has wrong length: expected " +
                  std::to_string(expected) + " bytes, found " + std::to_string(found));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint32_t> words(expected_count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(expected));
  if (in.gcount() != static_cast<std::streamsize>(expected))
    throw IoError("blob '" + path.string() + "' truncated at byte offset " +
                  std::to_string(in.gcount()));
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i)
    values[i] = std::bit_cast<float>(to_little(words[i]));
  return values;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace semlab::util
