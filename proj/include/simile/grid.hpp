#pragma once

#include "simile/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace simile {

/// Closed support [lower, upper] of one coordinate; infinite bounds allowed.
struct Support {
  double lower = -kInf;
  double upper = kInf;

  static Support real_line() { return {}; }
  static Support positive() { return {0.0, kInf}; }
  bool contains(double x) const { return x >= lower && x <= upper; }
  bool operator==(const Support&) const = default;
};

/// Data-driven partition of one coordinate.
///
/// The core edges e_0 < ... < e_{nInt+1} are evenly spaced with width w,
/// starting at min(y) - w/2 and ending at max(y) + w/2. Tail intervals cover
/// whatever part of the support lies outside the core; when the support
/// bound falls inside the outermost core interval that interval is clipped
/// to the bound instead. Intervals are half-open [lo, hi) except the last,
/// which is closed at a finite upper end.
struct AxisGrid {
  std::vector<double> core_edges;
  double width = 0.0;
  bool left_tail = false;
  bool right_tail = false;
  Support support;

  std::size_t core_count() const { return core_edges.size() - 1; }
  std::size_t interval_count() const {
    return core_count() + (left_tail ? 1 : 0) + (right_tail ? 1 : 0);
  }
  /// Interval index of x (tails included). Throws if x is outside the support.
  std::size_t locate(double x) const;
  /// Effective [lo, hi] of interval i after tails and clipping.
  std::pair<double, double> bounds(std::size_t i) const;

  bool operator==(const AxisGrid&) const = default;
};

/// Per-dimension interval index plus its row-major flattening.
struct CellIndex {
  std::vector<std::size_t> per_dim;
  std::size_t flat = 0;
};

/// Cartesian product of per-coordinate interval grids.
class IntervalGrid {
 public:
  IntervalGrid() = default;
  explicit IntervalGrid(std::vector<AxisGrid> axes);

  std::size_t dims() const { return axes_.size(); }
  std::size_t cell_count() const { return cell_count_; }
  const AxisGrid& axis(std::size_t d) const { return axes_.at(d); }
  const std::vector<AxisGrid>& axes() const { return axes_; }

  /// Row-major flat cell index of a d-dimensional point (hot path).
  std::size_t flat_index(const double* point) const;
  CellIndex index_of(std::span<const double> point) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  nlohmann::json to_json() const;
  static IntervalGrid from_json(const nlohmann::json& j);

  bool operator==(const IntervalGrid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<AxisGrid> axes_;
  std::vector<std::size_t> strides_;
  std::size_t cell_count_ = 0;
};

/// One occupied cell and how many observations fall in it.
struct CellCount {
  std::size_t cell = 0;
  std::size_t multiplicity = 0;
};

struct ObservedCells {
  std::vector<CellCount> cells;  // sorted by cell index
  std::size_t total = 0;
};

IntervalGrid build_grid(const Matrix& observed, std::size_t n_intervals,
                        std::span<const Support> support);
IntervalGrid build_grid(const Matrix& observed, std::size_t n_intervals, const Support& support);

CellIndex bin_index(const IntervalGrid& grid, std::span<const double> point);

/// Relative frequency of every cell over the rows of `points`.
std::vector<double> bin_relative_frequencies(const IntervalGrid& grid, const Matrix& points);

/// Adds the cell counts of `n` row-major points to `counts` (size cell_count).
void accumulate_counts(const IntervalGrid& grid, std::span<const double> points, std::size_t n,
                       std::span<std::uint64_t> counts);

ObservedCells observed_cells(const IntervalGrid& grid, const Matrix& observed);

}  // namespace simile
