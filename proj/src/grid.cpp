#include "simile/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace simile {

namespace {

nlohmann::json bound_to_json(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return v;
}

double bound_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -kInf;
    if (s == "inf") return kInf;
    throw ConfigError("grid: bad support bound '" + s + "'");
  }
  return j.get<double>();
}

AxisGrid build_axis(const Matrix& observed, Eigen::Index col, std::size_t n_intervals,
                    const Support& support) {
  const auto column = observed.col(col);
  double lo = kInf;
  double hi = -kInf;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const double y = column(i);
    if (!std::isfinite(y)) throw std::invalid_argument("build_grid: non-finite observation");
    if (!support.contains(y)) {
      std::ostringstream msg;
      msg << "build_grid: observation " << y << " in column " << col << " is outside the support";
      throw std::invalid_argument(msg.str());
    }
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (!(hi > lo)) {
    throw std::invalid_argument("build_grid: degenerate data (max == min) in column " +
                                std::to_string(col));
  }

  AxisGrid axis;
  axis.support = support;
  axis.width = (hi - lo) / static_cast<double>(n_intervals);
  const double first = lo - axis.width / 2.0;
  axis.core_edges.resize(n_intervals + 2);
  for (std::size_t k = 0; k < axis.core_edges.size(); ++k) {
    axis.core_edges[k] = first + static_cast<double>(k) * axis.width;
  }
  axis.core_edges.back() = hi + axis.width / 2.0;
  for (std::size_t k = 1; k < axis.core_edges.size(); ++k) {
    if (!(axis.core_edges[k] > axis.core_edges[k - 1])) {
      throw std::invalid_argument("build_grid: interval width too small for the data magnitude");
    }
  }
  axis.left_tail = support.lower < axis.core_edges.front();
  axis.right_tail = support.upper > axis.core_edges.back();
  return axis;
}

}  // namespace

std::size_t AxisGrid::locate(double x) const {
  if (!support.contains(x)) {
    std::ostringstream msg;
    msg << "bin_index: point " << x << " is outside the support [" << support.lower << ", "
        << support.upper << "]";
    throw std::invalid_argument(msg.str());
  }
  const std::size_t offset = left_tail ? 1 : 0;
  const std::size_t n = core_count();
  if (x < core_edges.front()) return 0;  // only reachable with a left tail
  if (x >= core_edges.back()) return right_tail ? offset + n : offset + n - 1;

  const double pos = std::floor((x - core_edges.front()) / width);
  std::size_t k = pos <= 0.0 ? 0 : std::min(static_cast<std::size_t>(pos), n - 1);
  while (k > 0 && x < core_edges[k]) --k;
  while (k + 1 < n && x >= core_edges[k + 1]) ++k;
  return offset + k;
}

std::pair<double, double> AxisGrid::bounds(std::size_t i) const {
  if (i >= interval_count()) throw std::out_of_range("AxisGrid::bounds: interval index");
  const std::size_t n = core_count();
  if (left_tail) {
    if (i == 0) return {support.lower, core_edges.front()};
    --i;
  }
  if (i == n) return {core_edges.back(), support.upper};
  return {std::max(core_edges[i], support.lower), std::min(core_edges[i + 1], support.upper)};
}

IntervalGrid::IntervalGrid(std::vector<AxisGrid> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw std::invalid_argument("IntervalGrid: no dimensions");
  strides_.assign(axes_.size(), 1);
  cell_count_ = 1;
  for (std::size_t d = axes_.size(); d-- > 0;) {
    strides_[d] = cell_count_;
    cell_count_ *= axes_[d].interval_count();
  }
}

std::size_t IntervalGrid::flat_index(const double* point) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) flat += axes_[d].locate(point[d]) * strides_[d];
  return flat;
}

CellIndex IntervalGrid::index_of(std::span<const double> point) const {
  if (point.size() != dims()) throw std::invalid_argument("bin_index: point dimension mismatch");
  CellIndex idx;
  idx.per_dim.resize(dims());
  for (std::size_t d = 0; d < dims(); ++d) {
    idx.per_dim[d] = axes_[d].locate(point[d]);
    idx.flat += idx.per_dim[d] * strides_[d];
  }
  return idx;
}

std::vector<std::size_t> IntervalGrid::unflatten(std::size_t flat) const {
  if (flat >= cell_count_) throw std::out_of_range("IntervalGrid::unflatten");
  std::vector<std::size_t> out(dims());
  for (std::size_t d = 0; d < dims(); ++d) {
    out[d] = flat / strides_[d];
    flat %= strides_[d];
  }
  return out;
}

nlohmann::json IntervalGrid::to_json() const {
  nlohmann::json dims_json = nlohmann::json::array();
  for (const auto& a : axes_) {
    dims_json.push_back({{"core_edges", a.core_edges},
                         {"width", a.width},
                         {"left_tail", a.left_tail},
                         {"right_tail", a.right_tail},
                         {"support", {bound_to_json(a.support.lower), bound_to_json(a.support.upper)}}});
  }
  return {{"dims", dims_json}};
}

IntervalGrid IntervalGrid::from_json(const nlohmann::json& j) {
  std::vector<AxisGrid> axes;
  for (const auto& d : j.at("dims")) {
    AxisGrid a;
    a.core_edges = d.at("core_edges").get<std::vector<double>>();
    a.width = d.at("width").get<double>();
    a.left_tail = d.at("left_tail").get<bool>();
    a.right_tail = d.at("right_tail").get<bool>();
    a.support = {bound_from_json(d.at("support").at(0)), bound_from_json(d.at("support").at(1))};
    if (a.core_edges.size() < 2 || !std::is_sorted(a.core_edges.begin(), a.core_edges.end()) ||
        !(a.width > 0.0)) {
      throw ConfigError("grid: malformed axis in JSON");
    }
    axes.push_back(std::move(a));
  }
  return IntervalGrid(std::move(axes));
}

IntervalGrid build_grid(const Matrix& observed, std::size_t n_intervals,
                        std::span<const Support> support) {
  if (observed.rows() < 2) throw std::invalid_argument("build_grid: need at least 2 observations");
  if (n_intervals == 0) throw std::invalid_argument("build_grid: nInt must be >= 1");
  if (support.size() != static_cast<std::size_t>(observed.cols())) {
    throw std::invalid_argument("build_grid: support dimension mismatch");
  }
  std::vector<AxisGrid> axes;
  for (Eigen::Index c = 0; c < observed.cols(); ++c) {
    axes.push_back(build_axis(observed, c, n_intervals, support[static_cast<std::size_t>(c)]));
  }
  return IntervalGrid(std::move(axes));
}

IntervalGrid build_grid(const Matrix& observed, std::size_t n_intervals, const Support& support) {
  std::vector<Support> all(static_cast<std::size_t>(observed.cols()), support);
  return build_grid(observed, n_intervals, all);
}

CellIndex bin_index(const IntervalGrid& grid, std::span<const double> point) {
  return grid.index_of(point);
}

void accumulate_counts(const IntervalGrid& grid, std::span<const double> points, std::size_t n,
                       std::span<std::uint64_t> counts) {
  const std::size_t d = grid.dims();
  if (points.size() < n * d) throw std::invalid_argument("accumulate_counts: buffer too small");
  if (counts.size() != grid.cell_count()) throw std::invalid_argument("accumulate_counts: count size");
  const double* p = points.data();
  for (std::size_t i = 0; i < n; ++i, p += d) ++counts[grid.flat_index(p)];
}

std::vector<double> bin_relative_frequencies(const IntervalGrid& grid, const Matrix& points) {
  if (points.rows() == 0) throw std::invalid_argument("bin_relative_frequencies: empty point set");
  if (static_cast<std::size_t>(points.cols()) != grid.dims()) {
    throw std::invalid_argument("bin_relative_frequencies: dimension mismatch");
  }
  std::vector<std::uint64_t> counts(grid.cell_count(), 0);
  accumulate_counts(grid, {points.data(), static_cast<std::size_t>(points.size())},
                    static_cast<std::size_t>(points.rows()), counts);
  std::vector<double> freq(counts.size());
  const double m = static_cast<double>(points.rows());
  for (std::size_t c = 0; c < counts.size(); ++c) freq[c] = static_cast<double>(counts[c]) / m;
  return freq;
}

ObservedCells observed_cells(const IntervalGrid& grid, const Matrix& observed) {
  if (static_cast<std::size_t>(observed.cols()) != grid.dims()) {
    throw std::invalid_argument("observed_cells: dimension mismatch");
  }
  std::map<std::size_t, std::size_t> tally;
  for (Eigen::Index i = 0; i < observed.rows(); ++i) ++tally[grid.flat_index(observed.row(i).data())];
  ObservedCells out;
  out.total = static_cast<std::size_t>(observed.rows());
  for (const auto& [cell, m] : tally) out.cells.push_back({cell, m});
  return out;
}

}  // namespace simile
