// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "wstack/fft.hpp"
#include "wstack/kernel.hpp"
#include "wstack/mesh.hpp"
#include "wstack/visdata.hpp"

// Slow, obviously-correct versions of the distributed kernels, used by the
// verify command.
namespace wstack::reference {

/// Direct convolution onto the full mesh, one record at a time.
ComplexGridd grid_direct(std::span<const VisRecord> records, const GridSpec& spec,
                         const KernelSpec& kernel);

/// O(N^4) two-dimensional DFT; the inverse carries 1/(n_u n_v).
RowMatrix<cplx> dft2d(const RowMatrix<cplx>& x, FftDirection dir);

}  // namespace wstack::reference
