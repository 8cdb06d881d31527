#include "simile/commands.hpp"

#include "simile/csv.hpp"
#include "simile/transforms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace simile {

namespace {

constexpr const char* kVersion = "simile 0.1.0";

std::vector<double> column(const Matrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

std::vector<std::string> data_header(ModelId model) {
  const auto d = output_dim(model);
  if (d == 1) return {"y"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < d; ++i) out.push_back("y" + std::to_string(i + 1));
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_theta(std::span<const double> theta) {
  std::string s;
  for (std::size_t i = 0; i < theta.size(); ++i) s += (i ? " " : "") + format_double(theta[i]);
  return s;
}

std::filesystem::path data_path_or_default(const RunConfig& config) {
  return config.data.empty() ? config.output_dir / "data.csv" : config.data;
}

std::filesystem::path components_path_or_default(const RunConfig& config) {
  return config.components.empty() ? config.output_dir / "components.json" : config.components;
}

std::filesystem::path emulator_path_or_default(const RunConfig& config) {
  return config.emulator.path.empty() ? config.output_dir / "emulator.bin" : config.emulator.path;
}

Matrix read_data(const RunConfig& config) {
  if (config.data.empty()) throw ConfigError("config needs 'data' (an observed-data CSV)");
  if (!std::filesystem::exists(config.data)) throw ConfigError("data file not found: " + config.data.string());
  auto table = read_csv(config.data);
  if (static_cast<std::size_t>(table.values.cols()) != output_dim(config.model)) {
    throw ConfigError("data file " + config.data.string() + " has " + std::to_string(table.values.cols()) +
                      " columns; model " + to_string(config.model) + " needs " +
                      std::to_string(output_dim(config.model)));
  }
  return std::move(table.values);
}

std::optional<FlowgraphComponentData> read_components(const RunConfig& config) {
  if (config.model != ModelId::flowgraph02) return std::nullopt;
  if (config.components.empty()) throw ConfigError("flowgraph runs need 'components' (component-data JSON)");
  try {
    return FlowgraphComponentData::from_json(read_json(config.components));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(config.components.string() + ": " + e.what());
  }
}

void check_params(const RunConfig& config, std::size_t n_params) {
  const auto expected = param_names(config.model, n_params).size();
  if (n_params != expected) {
    throw ConfigError("model " + to_string(config.model) + " takes " + std::to_string(expected) +
                      " parameters, priors give " + std::to_string(n_params));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Analysis prepare_analysis(const RunConfig& config) {
  auto components = read_components(config);
  return prepare_analysis(config, read_data(config), std::move(components));
}

Analysis prepare_analysis(const RunConfig& config, Matrix data, std::optional<FlowgraphComponentData> components) {
  Analysis a;
  a.config = config;
  a.data = std::move(data);
  a.components = std::move(components);
  const auto priors = config.effective_priors();
  check_params(config, priors.size());
  if (config.model == ModelId::flowgraph02 && !a.components) {
    throw ConfigError("flowgraph runs need component data");
  }
  if (config.likelihood == LikelihoodMode::flowgraph_mixed && config.model != ModelId::flowgraph02) {
    throw ConfigError("likelihood 'flowgraph-mixed' applies to the flowgraph02 model only");
  }

  if (config.likelihood == LikelihoodMode::emulated) {
    if (config.model == ModelId::flowgraph02) throw ConfigError("emulated likelihood is not available for flowgraph02");
    const auto path = emulator_path_or_default(config);
    if (!std::filesystem::exists(path)) throw ConfigError("emulator file not found: " + path.string());
    auto emu = std::make_shared<EmulatorModel>(EmulatorModel::load(path));
    if (emu->model != config.model) {
      throw ConfigError("emulator was trained for model " + to_string(emu->model));
    }
    if (emu->n_params != priors.size()) throw ConfigError("emulator parameter count does not match the priors");
    a.grid = emu->grid;
    a.cells = observed_cells(a.grid, a.data);
    a.emulator = std::move(emu);
    return a;
  }

  const bool need_grid = config.likelihood != LikelihoodMode::exact || a.data.rows() >= 2;
  if (need_grid && a.data.rows() > 0) {
    const auto support = output_support(config.model);
    a.grid = build_grid(a.data, config.n_int, support);
    a.cells = observed_cells(a.grid, a.data);
  }
  return a;
}

std::vector<std::string> Analysis::param_names() const {
  return simile::param_names(config.model, config.effective_priors().size());
}

LogLikFn Analysis::make_loglik() const {
  const auto model = config.model;
  const auto mode = config.likelihood;

  if (model == ModelId::flowgraph02) {
    FlowgraphData fd{*components, column(data, 0)};
    if (mode == LikelihoodMode::exact) {
      auto set = std::make_shared<LikelihoodComponentSet>(make_flowgraph_likelihood(fd, ZeroTwoMode::oracle));
      return [set](std::span<const double> theta, std::uint64_t id) { return set->evaluate(theta, id); };
    }
    std::shared_ptr<const SimileContext> ctx;
    if (!fd.first_passage.empty()) {
      ctx = std::make_shared<SimileContext>(
          SimileContext{grid, cells, config.n_sim, RngStream(config.seed, StreamId::candidate), config.workers});
    }
    auto set = std::make_shared<LikelihoodComponentSet>(make_flowgraph_likelihood(fd, ZeroTwoMode::simile, ctx));
    return [set](std::span<const double> theta, std::uint64_t id) { return set->evaluate(theta, id); };
  }

  switch (mode) {
    case LikelihoodMode::exact: {
      if (model == ModelId::network) {
        auto pairs = std::make_shared<Matrix>(data);
        return [pairs](std::span<const double> t, std::uint64_t) {
          return LogLikelihood::exact(exact_loglik_network(t[0], t[1], t[2], *pairs));
        };
      }
      auto y = std::make_shared<std::vector<double>>(column(data, 0));
      if (model == ModelId::normal) {
        return [y](std::span<const double> t, std::uint64_t) {
          return LogLikelihood::exact(exact_loglik_normal(t[0], t.size() > 1 ? t[1] : 1.0, *y));
        };
      }
      if (model == ModelId::lognormal) {
        return [y](std::span<const double> t, std::uint64_t) {
          return LogLikelihood::exact(exact_loglik_lognormal(t[0], t[1], *y));
        };
      }
      return [y](std::span<const double> t, std::uint64_t) {
        return LogLikelihood::exact(exact_loglik_indirect(t[0], t[1], *y));
      };
    }
    case LikelihoodMode::emulated: {
      auto emu = emulator;
      auto obs = std::make_shared<ObservedCells>(cells);
      return [emu, obs](std::span<const double> t, std::uint64_t) { return emu_loglik(*emu, t, *obs); };
    }
    case LikelihoodMode::simile:
    case LikelihoodMode::flowgraph_mixed: {
      auto ctx = std::make_shared<SimileContext>(
          SimileContext{grid, cells, config.n_sim, RngStream(config.seed, StreamId::candidate), config.workers});
      return [ctx, model](std::span<const double> t, std::uint64_t id) {
        const ModelSpec spec{model, std::vector<double>(t.begin(), t.end())};
        return simile_loglik(spec, ctx->grid, ctx->cells, ctx->n_sim, ctx->stream.with_substream(id), ctx->workers);
      };
    }
  }
  throw ConfigError("unsupported likelihood mode");
}

// ---------------------------------------------------------------------------

GeneratedData generate_data(const RunConfig& config) {
  if (config.theta.empty()) throw ConfigError("generate needs 'theta' (true parameter values)");
  const ModelSpec spec{config.model, config.theta};
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const RngStream stream(config.seed, StreamId::generation);
  GeneratedData out;
  out.observations = simulate(spec, config.effective_n_obs(), stream.with_substream(0), config.workers);
  if (config.model == ModelId::flowgraph02) {
    out.components = simulate_flowgraph_component_data(FlowgraphParams::from_theta(config.theta), config.counts,
                                                       stream.with_substream(1));
  }
  return out;
}

void cmd_generate(const RunConfig& config) {
  const auto generated = generate_data(config);
  const auto path = data_path_or_default(config);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_csv(path, data_header(config.model), generated.observations,
            {"model=" + to_string(config.model), "theta=" + format_theta(config.theta),
             "seed=" + std::to_string(config.seed), "n=" + std::to_string(generated.observations.rows())});
  if (generated.components) {
    const auto cpath = components_path_or_default(config);
    if (cpath.has_parent_path()) std::filesystem::create_directories(cpath.parent_path());
    auto j = generated.components->to_json();
    j["model"] = to_string(config.model);
    j["theta"] = config.theta;
    j["seed"] = config.seed;
    write_json(cpath, j);
  }
}

RunResult run_chain(const Analysis& analysis) {
  const auto priors = analysis.config.effective_priors();
  ChainConfig chain = analysis.config.chain;
  chain.seed = analysis.config.seed;
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.draws = mh_run(analysis.make_loglik(), priors, chain, analysis.param_names());
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (chain.n_burn > 0 && r.draws.burnin_acceptance == 0.0) {
    std::ostringstream msg;
    msg << "chain accepted no proposals during burnin (" << r.draws.neg_inf_rejections
        << " candidates had a -inf likelihood estimate); raise nSim or lower nInt";
    throw NumericalError(msg.str());
  }
  r.summary = summarize(r.draws);
  return r;
}

namespace {

void write_run_outputs(const Analysis& analysis, const RunResult& r) {
  const auto& config = analysis.config;
  const auto dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const auto method = method_label(config.likelihood);
  {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    out << format_summary_table(r.summary, method);
  }
  write_summary_csv(dir / "summary.csv", r.summary, method);
  export_trace(r.draws, dir / "trace.csv");
  if (analysis.grid.dims() > 0) write_json(dir / "grid.json", analysis.grid.to_json());

  nlohmann::json adapt = nlohmann::json::array();
  for (const auto& e : r.draws.adaptation) {
    adapt.push_back({{"iteration", e.iteration}, {"window_acceptance", e.window_acceptance}, {"scales", e.scales}});
  }
  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["config"] = config.to_json();
  meta["method"] = method;
  meta["n_cells"] = analysis.grid.cell_count();
  meta["n_occupied_cells"] = analysis.cells.cells.size();
  meta["acceptance_rate"] = r.draws.acceptance_rate;
  meta["burnin_acceptance"] = r.draws.burnin_acceptance;
  meta["neg_inf_rejections"] = r.draws.neg_inf_rejections;
  meta["prior_rejections"] = r.draws.prior_rejections;
  meta["evaluations"] = r.draws.evaluations;
  meta["final_scales"] = r.draws.final_scales;
  meta["adaptation"] = adapt;
  meta["wall_seconds"] = r.wall_seconds;
  write_json(dir / "run.json", meta);
}

}  // namespace

RunResult cmd_run(const RunConfig& config) {
  const auto analysis = prepare_analysis(config);
  auto r = run_chain(analysis);
  write_run_outputs(analysis, r);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<TuneCell> cmd_tune(const RunConfig& config) {
  if (config.tune.n_int.empty() || config.tune.n_sim.empty() || config.tune.replications == 0) {
    throw ConfigError("tune needs non-empty n_int and n_sim lists and replications >= 1");
  }
  Matrix data;
  std::optional<FlowgraphComponentData> components;
  std::filesystem::create_directories(config.output_dir);
  if (!config.data.empty() && std::filesystem::exists(config.data)) {
    data = read_data(config);
    components = read_components(config);
  } else {
    RunConfig gen = config;
    gen.data = config.output_dir / "tune_data.csv";
    gen.components = config.output_dir / "tune_components.json";
    cmd_generate(gen);
    data = read_data(gen);
    components = read_components(gen);
  }

  std::vector<RunConfig> jobs;
  std::vector<TuneCell> cells;
  const auto simulated_mode =
      config.model == ModelId::flowgraph02 ? LikelihoodMode::flowgraph_mixed : LikelihoodMode::simile;
  for (std::size_t rep = 0; rep < config.tune.replications; ++rep) {
    if (config.tune.include_exact) {
      RunConfig c = config;
      c.likelihood = LikelihoodMode::exact;
      c.seed = config.seed + rep;
      jobs.push_back(c);
      cells.push_back(TuneCell{.method = "exact", .replication = rep});
    }
    for (auto n_int : config.tune.n_int) {
      for (auto n_sim : config.tune.n_sim) {
        RunConfig c = config;
        c.likelihood = simulated_mode;
        c.n_int = n_int;
        c.n_sim = n_sim;
        c.seed = config.seed + rep;
        jobs.push_back(c);
        cells.push_back(TuneCell{.method = "simile", .n_int = n_int, .n_sim = n_sim, .replication = rep});
      }
    }
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& cell = cells[i];
    try {
      const auto analysis = prepare_analysis(jobs[i], data, components);
      PosteriorDraws draws;
      try {
        const auto r = run_chain(analysis);
        cell.summary = r.summary;
        draws = r.draws;
        cell.ok = true;
      } catch (const NumericalError& e) {
        cell.message = e.what();
      }
      if (cell.ok) {
        cell.acceptance = draws.acceptance_rate;
        cell.neg_inf_rate = draws.evaluations > 0 ? static_cast<double>(draws.neg_inf_rejections) /
                                                        static_cast<double>(draws.evaluations)
                                                  : 0.0;
      } else {
        cell.neg_inf_rate = 1.0;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.message = e.what();
    }
  }

  {
    std::ofstream out(config.output_dir / "tune.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write tune.csv");
    out << "method,n_int,n_sim,replication,ok,acceptance,neg_inf_rate,parameter,mean,sd,q2.5,q50,q97.5\n";
    const auto names = param_names(config.model, config.effective_priors().size());
    for (const auto& c : cells) {
      for (std::size_t p = 0; p < names.size(); ++p) {
        out << c.method << ',' << c.n_int << ',' << c.n_sim << ',' << c.replication << ',' << (c.ok ? 1 : 0) << ','
            << format_double(c.acceptance) << ',' << format_double(c.neg_inf_rate) << ',' << names[p];
        if (c.ok) {
          const auto& s = c.summary[p];
          out << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ',' << format_double(s.q025) << ','
              << format_double(s.q50) << ',' << format_double(s.q975);
        } else {
          out << ",nan,nan,nan,nan,nan";
        }
        out << '\n';
      }
    }
  }
  {
    std::ofstream out(config.output_dir / "tune.txt", std::ios::binary);
    out << format_tune_table(cells);
  }
  return cells;
}

std::string format_tune_table(const std::vector<TuneCell>& cells) {
  std::ostringstream out;
  for (const auto& c : cells) {
    std::ostringstream head;
    if (c.method == "exact") {
      head << "Exact";
    } else {
      head << "nInt=" << c.n_int << ", nSim=" << c.n_sim;
    }
    if (c.replication > 0) head << " (rep " << c.replication << ")";
    out << head.str() << '\n';
    if (!c.ok) {
      out << "  failed: " << c.message << "\n\n";
      continue;
    }
    out << format_summary_table(c.summary, c.method == "exact" ? "Exact" : "SimILE");
    out << std::fixed << std::setprecision(3) << "  acceptance " << c.acceptance << ", -inf rate " << c.neg_inf_rate
        << "\n\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

void cmd_emulate_train(const RunConfig& config) {
  if (config.model == ModelId::flowgraph02) throw ConfigError("emulator training is not available for flowgraph02");
  const auto data = read_data(config);
  const auto n_params = config.effective_priors().size();
  check_params(config, n_params);
  if (config.emulator.bounds.size() != n_params) {
    throw ConfigError("emulator.bounds needs one [lo, hi] pair per parameter on the unconstrained scale");
  }
  for (const auto& [lo, hi] : config.emulator.bounds) {
    if (!(lo < hi)) throw ConfigError("emulator.bounds: each pair needs lo < hi");
  }
  const auto grid = build_grid(data, config.n_int, output_support(config.model));

  EmulatorConfig ec;
  ec.model = config.model;
  ec.bounds = config.emulator.bounds;
  ec.n_design = config.emulator.n_design;
  ec.n_components = config.emulator.n_components;
  ec.n_sim = config.emulator.n_sim.value_or(config.n_sim);
  ec.restarts = config.emulator.restarts;
  ec.seed = config.seed;
  ec.workers = config.workers;

  std::filesystem::create_directories(config.output_dir);
  std::ofstream log(config.output_dir / "emulator_training.log", std::ios::binary);
  log << kVersion << ": training " << ec.n_design << " design points, nSim=" << ec.n_sim << ", " << grid.cell_count()
      << " cells\n";
  ec.progress = [&log, n = ec.n_design](std::size_t i, std::span<const double> theta, double seconds) {
    log << "point " << (i + 1) << '/' << n << " theta=" << format_theta(theta) << " seconds=" << std::fixed
        << std::setprecision(3) << seconds << std::defaultfloat << '\n';
    log.flush();
  };
  const auto start = std::chrono::steady_clock::now();
  const auto emu = train_emulator(ec, grid);
  log << "total seconds=" << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << '\n';

  const auto path = emulator_path_or_default(config);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  emu.save(path);
  write_csv(config.output_dir / "design.csv", param_names(config.model, n_params), emu.design.points,
            {"unconstrained coordinates"});
}

RunResult cmd_emulate_run(const RunConfig& config) {
  RunConfig c = config;
  c.likelihood = LikelihoodMode::emulated;
  return cmd_run(c);
}

// ---------------------------------------------------------------------------

void cmd_figure_data(const std::filesystem::path& run_dir, std::optional<std::vector<double>> theta,
                     std::size_t histogram_bins) {
  const auto meta_path = run_dir / "run.json";
  const auto trace_path = run_dir / "trace.csv";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(trace_path)) {
    throw ConfigError("run directory " + run_dir.string() + " lacks run.json or trace.csv");
  }
  if (histogram_bins == 0) throw ConfigError("histogram bins must be >= 1");
  const auto meta = read_json(meta_path);
  const auto config = parse_config(meta.at("config"));
  const auto draws = read_trace(trace_path);
  const auto out_dir = run_dir / "figures";
  std::filesystem::create_directories(out_dir);

  std::filesystem::copy_file(trace_path, out_dir / "trace.csv", std::filesystem::copy_options::overwrite_existing);

  for (std::size_t p = 0; p < draws.params(); ++p) {
    const auto x = column(draws.draws, static_cast<Eigen::Index>(p));
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double lo = *mn;
    const double width = *mx > *mn ? (*mx - *mn) / static_cast<double>(histogram_bins) : 1.0;
    const std::size_t bins = *mx > *mn ? histogram_bins : 1;
    std::vector<double> counts(bins, 0.0);
    for (double v : x) {
      auto b = static_cast<std::size_t>((v - lo) / width);
      counts[std::min(b, bins - 1)] += 1.0;
    }
    Matrix hist(static_cast<Eigen::Index>(bins), 3);
    for (std::size_t b = 0; b < bins; ++b) {
      const auto r = static_cast<Eigen::Index>(b);
      hist(r, 0) = lo + width * static_cast<double>(b);
      hist(r, 1) = lo + width * static_cast<double>(b + 1);
      hist(r, 2) = counts[b] / (static_cast<double>(x.size()) * width);
    }
    write_csv(out_dir / ("posterior_hist_" + draws.names[p] + ".csv"), {"lower", "upper", "density"}, hist);
  }

  const auto grid_path = run_dir / "grid.json";
  if (!std::filesystem::exists(grid_path)) return;
  const auto grid = IntervalGrid::from_json(read_json(grid_path));

  std::vector<double> at;
  if (theta) {
    at = *theta;
  } else {
    at.resize(draws.params());
    for (std::size_t p = 0; p < draws.params(); ++p) at[p] = draws.draws.col(static_cast<Eigen::Index>(p)).mean();
  }
  if (at.size() != draws.params()) throw ConfigError("figure-data theta has the wrong length");
  ModelSpec spec{config.model, at};
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto sim = make_simulator(spec);
  const auto counts = simulate_cell_counts(*sim, grid, config.n_sim, RngStream(config.seed, StreamId::figure),
                                           config.workers);

  std::vector<double> observed_freq(grid.cell_count(), 0.0);
  Matrix data;
  if (!config.data.empty() && std::filesystem::exists(config.data)) {
    data = read_csv(config.data).values;
    for (const auto& c : observed_cells(grid, data).cells) {
      observed_freq[c.cell] = static_cast<double>(c.multiplicity) / static_cast<double>(data.rows());
    }
  }

  const auto d = grid.dims();
  std::vector<std::string> header{"cell"};
  for (std::size_t k = 0; k < d; ++k) header.push_back(d == 1 ? "midpoint" : "midpoint" + std::to_string(k + 1));
  header.push_back("relative_frequency");
  header.push_back("observed_frequency");
  Matrix freq(static_cast<Eigen::Index>(grid.cell_count()), static_cast<Eigen::Index>(d + 3));
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    const auto r = static_cast<Eigen::Index>(cell);
    const auto idx = grid.unflatten(cell);
    freq(r, 0) = static_cast<double>(cell);
    for (std::size_t k = 0; k < d; ++k) {
      const auto& axis = grid.axis(k);
      auto [lo, hi] = axis.bounds(idx[k]);
      if (!std::isfinite(lo)) lo = hi - axis.width;
      if (!std::isfinite(hi)) hi = lo + axis.width;
      freq(r, static_cast<Eigen::Index>(k + 1)) = 0.5 * (lo + hi);
    }
    freq(r, static_cast<Eigen::Index>(d + 1)) = static_cast<double>(counts[cell]) / static_cast<double>(config.n_sim);
    freq(r, static_cast<Eigen::Index>(d + 2)) = observed_freq[cell];
  }
  write_csv(out_dir / "frequencies.csv", header, freq, {"theta=" + format_theta(at)});

  if (data.rows() > 0) {
    Matrix obs(data.rows(), data.cols() + 1);
    obs.leftCols(data.cols()) = data;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      const Eigen::VectorXd row = data.row(r);
      obs(r, data.cols()) = static_cast<double>(grid.flat_index(row.data()));
    }
    auto h = data_header(config.model);
    h.push_back("cell");
    write_csv(out_dir / "observed_cells.csv", h, obs);
  }
}

}  // namespace simile
