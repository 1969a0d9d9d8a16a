// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace wstack {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Bad input, a violated precondition or an unusable configuration.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures and malformed on-disk data.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contiguous block of a balanced split of `total` items over `parts`
/// owners: the first total % parts owners get one extra item.
struct Block {
  std::size_t start = 0;
  std::size_t count = 0;

  std::size_t end() const { return start + count; }
  bool contains(std::size_t i) const { return i >= start && i < end(); }
  friend bool operator==(const Block&, const Block&) = default;
};

inline Block balanced_block(std::size_t total, std::size_t parts, std::size_t index) {
  if (parts == 0 || index >= parts) throw UsageError("balanced_block: index out of range");
  const std::size_t base = total / parts;
  const std::size_t extra = total % parts;
  const std::size_t start = index * base + std::min(index, extra);
  return {start, base + (index < extra ? 1 : 0)};
}

/// Inverse of balanced_block: the owner of item i.
inline std::size_t balanced_owner(std::size_t total, std::size_t parts, std::size_t i) {
  const std::size_t base = total / parts;
  const std::size_t extra = total % parts;
  const std::size_t big = extra * (base + 1);
  if (i < big) return i / (base + 1);
  return extra + (i - big) / base;
}

/// 64-bit FNV-1a, used for image and file fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

}  // namespace wstack
