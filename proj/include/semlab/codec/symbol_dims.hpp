// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace semlab::codec {

/// Admissible symbol counts K, strictly increasing and positive.
class SymbolDimSet {
 public:
  SymbolDimSet() : SymbolDimSet(defaults()) {}
  explicit SymbolDimSet(std::vector<std::size_t> values);

  /// {64, 128, ..., 512}
  static SymbolDimSet defaults();
  /// "64,128,256" -> set. Throws ConfigError on malformed input.
  static SymbolDimSet parse(std::string_view text);

  const std::vector<std::size_t>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t min() const noexcept { return values_.front(); }
  std::size_t max() const noexcept { return values_.back(); }
  bool contains(std::size_t k) const noexcept;
  std::string to_string() const;

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  bool operator==(const SymbolDimSet&) const = default;

 private:
  std::vector<std::size_t> values_;
};

}  // namespace semlab::codec
