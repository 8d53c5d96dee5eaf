// SPDX-License-Identifier: Apache-2.0
#include "semlab/codec/symbol_dims.hpp"

#include <algorithm>
#include <charconv>

#include "semlab/error.hpp"

namespace semlab::codec {

SymbolDimSet::SymbolDimSet(std::vector<std::size_t> values) : values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("symbol dimension set is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == 0) throw ConfigError("symbol dimensions must be positive");
    if (i > 0 && values_[i] <= values_[i - 1])
      throw ConfigError("symbol dimensions must be strictly increasing: " + to_string());
  }
}

SymbolDimSet SymbolDimSet::defaults() {
  return SymbolDimSet({64, 128, 192, 256, 320, 384, 448, 512});
}

SymbolDimSet SymbolDimSet::parse(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    auto item = text.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError("malformed symbol dimension list '" + std::string(text) + "'");
    out.push_back(v);
    pos = end + 1;
  }
  return SymbolDimSet(std::move(out));
}

bool SymbolDimSet::contains(std::size_t k) const noexcept {
  return std::binary_search(values_.begin(), values_.end(), k);
}

std::string SymbolDimSet::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(values_[i]);
  }
  return s;
}

}  // namespace semlab::codec
