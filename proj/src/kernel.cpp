// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#include "wstack/kernel.hpp"

namespace wstack {

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::gaussian ? "gaussian" : "kaiser_bessel";
}

KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "gaussian") return KernelKind::gaussian;
  if (s == "kaiser_bessel" || s == "kb") return KernelKind::kaiser_bessel;
  throw UsageError("unknown kernel: " + std::string(s));
}

}  // namespace wstack
