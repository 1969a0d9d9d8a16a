// Copyright 2026 The wstack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <cstddef>

#include "wstack/common.hpp"

namespace wstack {

/// Geometry of the N_u x N_v x N_w mesh. w bounds are normalized.
struct GridSpec {
  std::size_t n_u = 64;
  std::size_t n_v = 64;
  std::size_t n_w = 1;
  double w_min = 0.0;
  double w_max = 1.0;
  double cell_size_lm = 1.0 / 128.0;

  std::size_t plane_cells() const { return n_u * n_v; }
  std::size_t cells() const { return plane_cells() * n_w; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

void validate(const GridSpec& spec);

/// Native w extent of the observation, carried beside the normalized mesh.
struct WRange {
  double min = 0.0;
  double max = 0.0;
  double span() const { return max - min; }
};

/// Rows [v_start, v_start + v_count) of every w-plane, owned by `rank`.
struct SlabRange {
  std::size_t rank = 0;
  std::size_t v_start = 0;
  std::size_t v_count = 0;

  std::size_t v_end() const { return v_start + v_count; }
  bool contains(std::size_t row) const { return row >= v_start && row < v_end(); }
  friend bool operator==(const SlabRange&, const SlabRange&) = default;
};

SlabRange slab_of(const GridSpec& spec, std::size_t rank, std::size_t n_ranks);

std::size_t owner_rank(const GridSpec& spec, double gv, std::size_t n_ranks);

struct CellCoord {
  double gu = 0.0;
  double gv = 0.0;
  std::size_t plane = 0;
};

/// Continuous cell coordinates and nearest w-plane (round half up).
CellCoord uvw_to_cell(const GridSpec& spec, double u, double v, double w);

struct DirectionCosines {
  double l = 0.0;
  double m = 0.0;
};

DirectionCosines pixel_to_lm(const GridSpec& spec, std::size_t i, std::size_t j);

/// Native w of plane k: planes sample w = k / (n_w - 1); one plane sits at the midpoint.
double plane_w_native(const GridSpec& spec, std::size_t k, const WRange& w);

/// Bytes of a full complex mesh with `component_bytes` per real/imag part.
inline double mesh_bytes(const GridSpec& spec, std::size_t component_bytes = 8) {
  return static_cast<double>(spec.n_u) * static_cast<double>(spec.n_v) *
         static_cast<double>(spec.n_w) * 2.0 * static_cast<double>(component_bytes);
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Complex mesh values on one slab, laid out (plane, v-row, u-column) row-major.
template <typename Scalar>
class ComplexGrid {
 public:
  using value_type = std::complex<Scalar>;
  using Storage = Eigen::Array<value_type, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<RowMatrix<value_type>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<value_type>>;

  ComplexGrid() = default;
  ComplexGrid(const GridSpec& spec, const SlabRange& slab)
      : spec_(spec), slab_(slab), data_(Storage::Zero(static_cast<Eigen::Index>(size()))) {}

  const GridSpec& spec() const { return spec_; }
  const SlabRange& slab() const { return slab_; }

  std::size_t plane_size() const { return spec_.n_u * slab_.v_count; }
  std::size_t size() const { return plane_size() * spec_.n_w; }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  /// Row index is global (v_start based).
  value_type& at(std::size_t plane, std::size_t row, std::size_t col) {
    return data_[static_cast<Eigen::Index>(index(plane, row, col))];
  }
  const value_type& at(std::size_t plane, std::size_t row, std::size_t col) const {
    return data_[static_cast<Eigen::Index>(index(plane, row, col))];
  }

  PlaneMap plane(std::size_t k) {
    return PlaneMap(data_.data() + k * plane_size(), static_cast<Eigen::Index>(slab_.v_count),
                    static_cast<Eigen::Index>(spec_.n_u));
  }
  ConstPlaneMap plane(std::size_t k) const {
    return ConstPlaneMap(data_.data() + k * plane_size(),
                         static_cast<Eigen::Index>(slab_.v_count),
                         static_cast<Eigen::Index>(spec_.n_u));
  }

  void set_zero() { data_.setZero(); }

  bool same_shape(const ComplexGrid& other) const {
    return spec_ == other.spec_ && slab_.v_start == other.slab_.v_start &&
           slab_.v_count == other.slab_.v_count;
  }

 private:
  std::size_t index(std::size_t plane, std::size_t row, std::size_t col) const {
    return (plane * slab_.v_count + (row - slab_.v_start)) * spec_.n_u + col;
  }

  GridSpec spec_;
  SlabRange slab_;
  Storage data_;
};

using ComplexGridd = ComplexGrid<double>;

/// Largest |a - b| over all cells; shapes must match.
template <typename Scalar>
Scalar max_abs_diff(const ComplexGrid<Scalar>& a, const ComplexGrid<Scalar>& b) {
  if (!a.same_shape(b)) throw UsageError("max_abs_diff: grid shapes differ");
  if (a.size() == 0) return Scalar(0);
  return (a.data() - b.data()).abs().maxCoeff();
}

}  // namespace wstack
