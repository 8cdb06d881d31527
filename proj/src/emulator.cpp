#include "simile/emulator.hpp"

#include "simile/transforms.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace simile {

namespace {

constexpr double kMorrisMitchellHalfPower = 10.0;  // p = 20 on distances
constexpr double kExtrapolationMargin = 0.1;
constexpr const char* kMagic = "SIMILE-EMULATOR";

Matrix normalized(const Matrix& points, const Bounds& bounds) {
  Matrix u = points;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
    u.col(j) = (u.col(j).array() - lo) / (hi - lo);
  }
  return u;
}

double squared_distance(const Matrix& u, Eigen::Index a, Eigen::Index b) {
  return (u.row(a) - u.row(b)).squaredNorm();
}

void check_bounds(const Bounds& bounds) {
  if (bounds.empty()) throw std::invalid_argument("LHS: no dimensions");
  for (const auto& [lo, hi] : bounds) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("LHS: degenerate bounds");
  }
}

}  // namespace

double min_pairwise_distance(const Matrix& points, const Bounds& bounds) {
  const Matrix u = normalized(points, bounds);
  double best = kInf;
  for (Eigen::Index a = 0; a < u.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < u.rows(); ++b) best = std::min(best, squared_distance(u, a, b));
  }
  return std::sqrt(best);
}

LhsDesign random_lhs(std::size_t n, const Bounds& bounds, Engine& engine) {
  if (n < 2) throw std::invalid_argument("maximin_lhs: n must be >= 2");
  check_bounds(bounds);
  LhsDesign design;
  design.bounds = bounds;
  design.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bounds.size()));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), engine);
    const auto [lo, hi] = bounds[j];
    for (std::size_t i = 0; i < n; ++i) {
      design.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          lo + (static_cast<double>(perm[i]) + 0.5) / static_cast<double>(n) * (hi - lo);
    }
  }
  design.min_distance = min_pairwise_distance(design.points, bounds);
  return design;
}

LhsDesign improve_maximin(LhsDesign design, Engine& engine, std::size_t iterations) {
  const Eigen::Index n = design.points.rows();
  const Eigen::Index dims = design.points.cols();
  Matrix u = normalized(design.points, design.bounds);
  auto energy = [](double d2) { return std::pow(d2, -kMorrisMitchellHalfPower); };

  Matrix d2(n, n);
  std::vector<double> row_min(static_cast<std::size_t>(n), kInf);
  for (Eigen::Index a = 0; a < n; ++a) {
    d2(a, a) = kInf;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      d2(a, b) = d2(b, a) = squared_distance(u, a, b);
    }
  }
  auto refresh_row = [&](Eigen::Index a) { row_min[static_cast<std::size_t>(a)] = d2.row(a).minCoeff(); };
  for (Eigen::Index a = 0; a < n; ++a) refresh_row(a);
  double global_min = *std::min_element(row_min.begin(), row_min.end());

  std::uniform_int_distribution<Eigen::Index> pick_row(0, n - 1);
  std::uniform_int_distribution<Eigen::Index> pick_dim(0, dims - 1);
  std::vector<double> new_i(static_cast<std::size_t>(n)), new_j(static_cast<std::size_t>(n));

  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::Index d = pick_dim(engine);
    const Eigen::Index i = pick_row(engine);
    Eigen::Index j = pick_row(engine);
    if (i == j) continue;
    const double xi = u(i, d);
    const double xj = u(j, d);
    double cand_min = kInf;
    double delta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      const double xk = u(k, d);
      const auto ks = static_cast<std::size_t>(k);
      new_i[ks] = d2(i, k) - (xi - xk) * (xi - xk) + (xj - xk) * (xj - xk);
      new_j[ks] = d2(j, k) - (xj - xk) * (xj - xk) + (xi - xk) * (xi - xk);
      cand_min = std::min({cand_min, new_i[ks], new_j[ks]});
      delta += energy(new_i[ks]) - energy(d2(i, k)) + energy(new_j[ks]) - energy(d2(j, k));
    }
    if (cand_min < global_min || !(delta < 0)) continue;

    std::swap(u(i, d), u(j, d));
    std::swap(design.points(i, d), design.points(j, d));
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      const auto ks = static_cast<std::size_t>(k);
      const double old_i = d2(i, k);
      const double old_j = d2(j, k);
      d2(i, k) = d2(k, i) = new_i[ks];
      d2(j, k) = d2(k, j) = new_j[ks];
      if ((old_i == row_min[ks] && new_i[ks] > old_i) || (old_j == row_min[ks] && new_j[ks] > old_j)) {
        refresh_row(k);
      } else {
        row_min[ks] = std::min({row_min[ks], new_i[ks], new_j[ks]});
      }
    }
    refresh_row(i);
    refresh_row(j);
    global_min = *std::min_element(row_min.begin(), row_min.end());
  }
  design.min_distance = std::sqrt(global_min);
  return design;
}

LhsDesign maximin_lhs(std::size_t n, const Bounds& bounds, const RngStream& stream, std::size_t restarts,
                      std::size_t iterations) {
  if (n < 2) throw std::invalid_argument("maximin_lhs: n must be >= 2");
  if (iterations == 0) iterations = 20 * n * bounds.size();
  restarts = std::max<std::size_t>(restarts, 1);
  LhsDesign best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Engine engine = stream.engine(r);
    auto design = improve_maximin(random_lhs(n, bounds, engine), engine, iterations);
    if (r == 0 || design.min_distance > best.min_distance) best = std::move(design);
  }
  return best;
}

Matrix train_targets(const Matrix& design_points, ModelId model, const IntervalGrid& grid, std::size_t n_sim,
                     const RngStream& stream, std::size_t workers, const TrainingProgress& progress) {
  const auto n_params = static_cast<std::size_t>(design_points.cols());
  const auto supports = param_supports(model, n_params);
  Matrix out(design_points.rows(), static_cast<Eigen::Index>(grid.cell_count()));
  for (Eigen::Index i = 0; i < design_points.rows(); ++i) {
    const Eigen::VectorXd row = design_points.row(i);
    std::vector<double> theta;
    const auto start = std::chrono::steady_clock::now();
    try {
      theta = from_unconstrained(supports, std::span<const double>(row.data(), n_params));
      const auto sim = make_simulator(ModelSpec{model, theta});
      const auto counts = simulate_cell_counts(*sim, grid, n_sim, stream.with_substream(static_cast<std::uint64_t>(i)),
                                               workers);
      std::uint64_t running = 0;
      for (std::size_t c = 0; c < counts.size(); ++c) {
        running += counts[c];
        out(i, static_cast<Eigen::Index>(c)) = static_cast<double>(running) / static_cast<double>(n_sim);
      }
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "train_targets: design point " << i << " (";
      for (std::size_t j = 0; j < n_params; ++j) msg << (j ? ", " : "") << row(static_cast<Eigen::Index>(j));
      msg << "): " << e.what();
      throw NumericalError(msg.str());
    }
    if (progress) {
      progress(static_cast<std::size_t>(i), theta,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  }
  return out;
}

PcaResult pca_fit(const Matrix& data, std::size_t k) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto c = static_cast<std::size_t>(data.cols());
  if (k == 0 || k > std::min(n, c)) throw std::invalid_argument("pca_fit: k must be in [1, min(n, C)]");
  PcaResult out;
  out.column_means = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - out.column_means.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-10 * s(0) && s(i) > 0) ++rank;
  }
  if (k > rank) {
    throw std::invalid_argument("pca_fit: k = " + std::to_string(k) + " exceeds numerical rank " + std::to_string(rank));
  }
  Eigen::MatrixXd basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0) basis.col(j) *= -1.0;
  }
  out.basis = basis;
  out.scores = centered * basis;
  out.explained_variance = s.head(static_cast<Eigen::Index>(k)).array().square() / std::max<double>(1.0, n - 1.0);
  out.reconstruction_error = (centered - out.scores * out.basis.transpose()).norm();
  return out;
}

std::vector<double> monotone_projection(std::span<const double> cumulative) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : cumulative) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block last = blocks.back();
      blocks.pop_back();
      blocks.back().sum += last.sum;
      blocks.back().count += last.count;
    }
  }
  std::vector<double> out;
  out.reserve(cumulative.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, std::clamp(b.mean(), 0.0, 1.0));
  if (!out.empty()) out.back() = 1.0;
  return out;
}

void EmulatorModel::rebuild() {
  gps_.clear();
  for (std::size_t k = 0; k < hyper.size(); ++k) {
    gps_.emplace_back(design.points, pca.scores.col(static_cast<Eigen::Index>(k)), hyper[k]);
  }
}

void EmulatorModel::check_invariants() const {
  const auto cells = static_cast<Eigen::Index>(grid.cell_count());
  if (targets.cols() != cells || targets.rows() != design.points.rows()) {
    throw ConfigError("emulator: training matrix shape does not match grid/design");
  }
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    if (targets(i, 0) < 0 || targets(i, cells - 1) != 1.0) throw ConfigError("emulator: training row not a CDF");
    for (Eigen::Index c = 1; c < cells; ++c) {
      if (targets(i, c) < targets(i, c - 1)) throw ConfigError("emulator: training row not nondecreasing");
    }
  }
  const auto k = pca.basis.cols();
  if (pca.basis.rows() != cells || static_cast<std::size_t>(k) != hyper.size()) {
    throw ConfigError("emulator: PCA basis shape mismatch");
  }
  const Eigen::MatrixXd gram = pca.basis.transpose() * pca.basis;
  if (!gram.isApprox(Eigen::MatrixXd::Identity(k, k), 1e-8)) throw ConfigError("emulator: PCA basis not orthonormal");
  for (const auto& h : hyper) {
    if (!(h.nugget > 0)) throw ConfigError("emulator: nugget must be > 0");
    if (h.lengths.size() != n_params) throw ConfigError("emulator: GP length count mismatch");
  }
  if (design.bounds.size() != n_params || static_cast<std::size_t>(design.points.cols()) != n_params) {
    throw ConfigError("emulator: design dimension mismatch");
  }
}

std::vector<double> EmulatorModel::to_design_coords(std::span<const double> theta, bool* extrapolated) const {
  if (theta.size() != n_params) throw std::invalid_argument("emulator: parameter dimension mismatch");
  const auto coords = to_unconstrained(param_supports(model, n_params), theta);
  *extrapolated = false;
  for (std::size_t j = 0; j < n_params; ++j) {
    const auto [lo, hi] = design.bounds[j];
    const double margin = kExtrapolationMargin * (hi - lo);
    if (coords[j] < lo - margin || coords[j] > hi + margin) {
      std::ostringstream msg;
      msg << "emulator: parameter " << j << " maps to " << coords[j] << ", beyond the design box [" << lo << ", "
          << hi << "] plus 10% margin";
      throw std::invalid_argument(msg.str());
    }
    if (coords[j] < lo || coords[j] > hi) *extrapolated = true;
  }
  return coords;
}

std::vector<double> EmulatorModel::predict_cumulative(std::span<const double> theta) const {
  bool extrapolated = false;
  const auto x = to_design_coords(theta, &extrapolated);
  Vector cumulative = pca.column_means;
  for (std::size_t k = 0; k < gps_.size(); ++k) {
    cumulative += gps_[k].predict(x) * pca.basis.col(static_cast<Eigen::Index>(k));
  }
  return {cumulative.data(), cumulative.data() + cumulative.size()};
}

CellPrediction EmulatorModel::predict_cells(std::span<const double> theta) const {
  CellPrediction out;
  to_design_coords(theta, &out.extrapolated);
  const auto projected = monotone_projection(predict_cumulative(theta));
  out.probabilities.resize(projected.size());
  double prev = 0.0;
  for (std::size_t c = 0; c < projected.size(); ++c) {
    out.probabilities[c] = projected[c] - prev;
    prev = projected[c];
  }
  return out;
}

namespace {

struct ArrayRef {
  const double* data;
  Eigen::Index rows, cols;
};

void write_arrays(std::ostream& out, const std::vector<ArrayRef>& arrays) {
  for (const auto& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.data), static_cast<std::streamsize>(sizeof(double) * a.rows * a.cols));
  }
}

}  // namespace

void EmulatorModel::save(const std::filesystem::path& path) const {
  const Matrix basis = pca.basis;
  const Matrix scores = pca.scores;
  const std::vector<std::pair<std::string, ArrayRef>> arrays = {
      {"design", {design.points.data(), design.points.rows(), design.points.cols()}},
      {"targets", {targets.data(), targets.rows(), targets.cols()}},
      {"column_means", {pca.column_means.data(), pca.column_means.size(), 1}},
      {"basis", {basis.data(), basis.rows(), basis.cols()}},
      {"scores", {scores.data(), scores.rows(), scores.cols()}},
      {"explained_variance", {pca.explained_variance.data(), pca.explained_variance.size(), 1}},
  };
  nlohmann::json header;
  header["format_version"] = 1;
  header["byte_order"] = "little";
  header["model"] = to_string(model);
  header["n_params"] = n_params;
  header["grid"] = grid.to_json();
  header["bounds"] = design.bounds;
  header["min_distance"] = design.min_distance;
  header["reconstruction_error"] = pca.reconstruction_error;
  nlohmann::json gp_json = nlohmann::json::array();
  for (const auto& h : hyper) {
    gp_json.push_back({{"lengths", h.lengths},
                       {"variance", h.variance},
                       {"nugget", h.nugget},
                       {"mean", h.mean},
                       {"log_likelihood", std::isfinite(h.log_likelihood) ? nlohmann::json(h.log_likelihood)
                                                                          : nlohmann::json(nullptr)}});
  }
  header["gps"] = gp_json;
  std::size_t offset = 0;
  for (const auto& [name, a] : arrays) {
    header["arrays"][name] = {{"offset", offset}, {"rows", a.rows}, {"cols", a.cols}};
    offset += sizeof(double) * static_cast<std::size_t>(a.rows * a.cols);
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMagic << '\n' << text.size() << '\n' << text;
  std::vector<ArrayRef> refs;
  for (const auto& [name, a] : arrays) refs.push_back(a);
  write_arrays(out, refs);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

EmulatorModel EmulatorModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read emulator " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw ConfigError(path.string() + " is not an emulator file");
  std::string len_line;
  std::getline(in, len_line);
  const std::size_t len = std::stoull(len_line);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);
  if (header.at("format_version").get<int>() != 1) throw ConfigError("emulator: unsupported format version");
  const auto blob_start = in.tellg();

  auto read_array = [&](const std::string& name) {
    const auto& spec = header.at("arrays").at(name);
    Matrix m(spec.at("rows").get<Eigen::Index>(), spec.at("cols").get<Eigen::Index>());
    in.seekg(blob_start + static_cast<std::streamoff>(spec.at("offset").get<std::size_t>()));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw ConfigError("emulator: truncated array '" + name + "'");
    return m;
  };

  EmulatorModel em;
  em.model = model_from_string(header.at("model").get<std::string>());
  em.n_params = header.at("n_params").get<std::size_t>();
  em.grid = IntervalGrid::from_json(header.at("grid"));
  em.design.bounds = header.at("bounds").get<Bounds>();
  em.design.min_distance = header.at("min_distance").get<double>();
  em.design.points = read_array("design");
  em.targets = read_array("targets");
  em.pca.column_means = read_array("column_means").col(0);
  em.pca.basis = read_array("basis");
  em.pca.scores = read_array("scores");
  em.pca.explained_variance = read_array("explained_variance").col(0);
  em.pca.reconstruction_error = header.at("reconstruction_error").get<double>();
  for (const auto& g : header.at("gps")) {
    GpHyperparams h;
    h.lengths = g.at("lengths").get<std::vector<double>>();
    h.variance = g.at("variance").get<double>();
    h.nugget = g.at("nugget").get<double>();
    h.mean = g.at("mean").get<double>();
    h.log_likelihood = g.at("log_likelihood").is_null() ? -kInf : g.at("log_likelihood").get<double>();
    em.hyper.push_back(std::move(h));
  }
  em.check_invariants();
  em.rebuild();
  return em;
}

EmulatorModel fit_emulator(IntervalGrid grid, ModelId model, LhsDesign design, Matrix targets,
                           std::size_t n_components, const GpFitOptions& options) {
  EmulatorModel em;
  em.grid = std::move(grid);
  em.model = model;
  em.n_params = static_cast<std::size_t>(design.points.cols());
  em.design = std::move(design);
  em.targets = std::move(targets);
  em.pca = pca_fit(em.targets, n_components);
  for (std::size_t k = 0; k < n_components; ++k) {
    em.hyper.push_back(gp_fit(em.design.points, em.pca.scores.col(static_cast<Eigen::Index>(k)), options));
  }
  em.check_invariants();
  em.rebuild();
  return em;
}

EmulatorModel train_emulator(const EmulatorConfig& config, const IntervalGrid& grid) {
  auto design = maximin_lhs(config.n_design, config.bounds, RngStream(config.seed, StreamId::design), config.restarts);
  auto targets = train_targets(design.points, config.model, grid, config.n_sim,
                               RngStream(config.seed, StreamId::emulator_training), config.workers,
                               config.progress);
  return fit_emulator(grid, config.model, std::move(design), std::move(targets), config.n_components, config.gp);
}

LogLikelihood emu_loglik(const EmulatorModel& model, std::span<const double> theta, const ObservedCells& observed) {
  const auto pred = model.predict_cells(theta);
  LogLikelihood out;
  for (const auto& [cell, mult] : observed.cells) {
    const double p = pred.probabilities.at(cell);
    if (!(p > 0)) {
      ++out.zero_cells;
      continue;
    }
    out.value += static_cast<double>(mult) * std::log(p);
  }
  if (out.zero_cells > 0) out.value = -kInf;
  return out;
}

}  // namespace simile
