// Copyright 2026 The gmfsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Wire format for SparseVector messages.
//
//   offset 0        u32 LE   entry count n
//   offset 4 + 12i  u32 LE   index of entry i
//   offset 8 + 12i  f64 LE   IEEE-754 value of entry i
//
// A message is exactly 4 + 12n bytes. The overhead ledger meters these
// byte strings, so the layout is fixed.

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmf/error.hpp"
#include "gmf/grad_core.hpp"

namespace gmf::codec {

using Bytes = std::vector<std::byte>;

inline constexpr std::size_t kHeaderBytes = 4;
inline constexpr std::size_t kEntryBytes = 12;

constexpr std::size_t encoded_size(std::size_t nnz) { return kHeaderBytes + kEntryBytes * nnz; }

namespace detail {

template <class UInt>
void put_le(Bytes& out, UInt x) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<std::byte>((x >> (8 * i)) & 0xFFu));
  }
}

template <class UInt>
UInt get_le(std::span<const std::byte> in, std::size_t offset) {
  UInt x = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    x |= static_cast<UInt>(std::to_integer<std::uint8_t>(in[offset + i])) << (8 * i);
  }
  return x;
}

}  // namespace detail

inline Bytes encode(const SparseVector& g) {
  Bytes out;
  out.reserve(encoded_size(g.nnz()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.nnz()));
  for (const auto& e : g.entries()) {
    detail::put_le<std::uint32_t>(out, e.index);
    detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(e.value));
  }
  return out;
}

// Entry count from the header alone.
inline std::size_t entry_count(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes) throw CodecError("codec: payload shorter than header");
  return detail::get_le<std::uint32_t>(bytes, 0);
}

inline SparseVector decode(std::span<const std::byte> bytes, std::size_t dim) {
  const std::size_t n = entry_count(bytes);
  if (bytes.size() != encoded_size(n)) {
    throw CodecError("codec: payload of " + std::to_string(bytes.size()) +
                     " bytes does not match entry count " + std::to_string(n));
  }
  std::vector<SparseEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = kHeaderBytes + kEntryBytes * i;
    const auto index = detail::get_le<std::uint32_t>(bytes, off);
    const auto value = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, off + 4));
    if (index >= dim) {
      throw CodecError("codec: entry " + std::to_string(i) + " index " + std::to_string(index) +
                       " >= dim " + std::to_string(dim));
    }
    if (!entries.empty() && entries.back().index >= index) {
      throw CodecError("codec: entry " + std::to_string(i) + " breaks index ordering");
    }
    if (value == 0.0) throw CodecError("codec: entry " + std::to_string(i) + " stores zero");
    entries.push_back({index, value});
  }
  try {
    return SparseVector(dim, std::move(entries));
  } catch (const PreconditionError& e) {
    throw CodecError(std::string("codec: ") + e.what());
  }
}

}  // namespace gmf::codec
