#include "simile/commands.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace simile;

namespace {

RunConfig config_from(const std::string& json_text, const std::string& base_dir) {
  try {
    return parse_config(nlohmann::json::parse(json_text), base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

py::dict summary_row(const ParameterSummary& s) {
  py::dict d;
  d["name"] = s.name;
  d["mean"] = s.mean;
  d["sd"] = s.sd;
  d["q2.5"] = s.q025;
  d["q50"] = s.q50;
  d["q97.5"] = s.q975;
  return d;
}

py::dict run_result(const RunResult& r) {
  py::list rows;
  for (const auto& s : r.summary) rows.append(summary_row(s));
  py::dict d;
  d["names"] = r.draws.names;
  d["draws"] = r.draws.draws;
  d["summary"] = rows;
  d["acceptance"] = r.draws.acceptance_rate;
  d["burnin_acceptance"] = r.draws.burnin_acceptance;
  d["neg_inf_rejections"] = r.draws.neg_inf_rejections;
  d["evaluations"] = r.draws.evaluations;
  d["wall_seconds"] = r.wall_seconds;
  return d;
}

Matrix as_rows(const Matrix& data, ModelId model) {
  if (static_cast<std::size_t>(data.cols()) != output_dim(model)) {
    throw ConfigError("data must have " + std::to_string(output_dim(model)) + " column(s)");
  }
  return data;
}

}  // namespace

PYBIND11_MODULE(_simile, m) {
  m.doc() = "Simulated interval-censored likelihoods with a pseudo-marginal sampler";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def(
      "simulate",
      [](const std::string& model, std::vector<double> theta, std::size_t n, std::uint64_t seed,
         std::size_t workers) {
        return simulate(ModelSpec{model_from_string(model), std::move(theta)}, n,
                        RngStream(seed, StreamId::generation), workers);
      },
      py::arg("model"), py::arg("theta"), py::arg("n"), py::arg("seed") = 1, py::arg("workers") = 1,
      "Draws n observations, one row each.");

  m.def(
      "simile_loglik",
      [](const std::string& model, std::vector<double> theta, const Matrix& data, std::size_t n_int,
         std::size_t n_sim, std::uint64_t seed, std::uint64_t eval_id, std::size_t workers) {
        const auto id = model_from_string(model);
        const Matrix rows = as_rows(data, id);
        const auto support = output_support(id);
        const auto grid = build_grid(rows, n_int, support);
        const auto cells = observed_cells(grid, rows);
        return simile_loglik(ModelSpec{id, std::move(theta)}, grid, cells, n_sim,
                             RngStream(seed, StreamId::candidate, eval_id), workers)
            .value;
      },
      py::arg("model"), py::arg("theta"), py::arg("data"), py::arg("n_int"), py::arg("n_sim"), py::arg("seed") = 1,
      py::arg("eval_id") = 0, py::arg("workers") = 1,
      "SimILE log-likelihood estimate; -inf when an occupied cell gets no simulated draws.");

  m.def(
      "grid_json",
      [](const std::string& model, const Matrix& data, std::size_t n_int) {
        const auto id = model_from_string(model);
        const auto support = output_support(id);
        return build_grid(as_rows(data, id), n_int, support).to_json().dump();
      },
      py::arg("model"), py::arg("data"), py::arg("n_int"), "Interval grid of the data as a JSON string.");

  m.def(
      "sample",
      [](const std::function<double(std::vector<double>, std::uint64_t)>& loglik, const std::string& priors_json,
         std::size_t n_burn, std::size_t n_keep, std::vector<double> initial, std::vector<double> scales,
         std::uint64_t seed) {
        std::vector<Prior> priors;
        for (const auto& p : nlohmann::json::parse(priors_json)) priors.push_back(Prior::from_json(p));
        ChainConfig c;
        c.n_burn = n_burn;
        c.n_keep = n_keep;
        c.initial = std::move(initial);
        c.scales = std::move(scales);
        c.seed = seed;
        LogLikFn fn = [&](std::span<const double> theta, std::uint64_t id) {
          py::gil_scoped_acquire gil;
          return LogLikelihood::exact(loglik(std::vector<double>(theta.begin(), theta.end()), id));
        };
        const auto draws = mh_run(fn, priors, c);
        RunResult r{draws, summarize(draws), 0.0};
        return run_result(r);
      },
      py::arg("loglik"), py::arg("priors_json"), py::arg("n_burn"), py::arg("n_keep"), py::arg("initial"),
      py::arg("scales") = std::vector<double>{}, py::arg("seed") = 1,
      "Random-walk MH on a Python log-likelihood loglik(theta, eval_id).");

  m.def(
      "generate", [](const std::string& j, const std::string& base) { cmd_generate(config_from(j, base)); },
      py::arg("config_json"), py::arg("base_dir") = "");
  m.def(
      "run", [](const std::string& j, const std::string& base) { return run_result(cmd_run(config_from(j, base))); },
      py::arg("config_json"), py::arg("base_dir") = "");
  m.def(
      "tune",
      [](const std::string& j, const std::string& base) { return format_tune_table(cmd_tune(config_from(j, base))); },
      py::arg("config_json"), py::arg("base_dir") = "");
  m.def(
      "emulate_train", [](const std::string& j, const std::string& base) { cmd_emulate_train(config_from(j, base)); },
      py::arg("config_json"), py::arg("base_dir") = "");
  m.def(
      "emulate_run",
      [](const std::string& j, const std::string& base) { return run_result(cmd_emulate_run(config_from(j, base))); },
      py::arg("config_json"), py::arg("base_dir") = "");
  m.def(
      "figure_data",
      [](const std::filesystem::path& run_dir, std::optional<std::vector<double>> theta, std::size_t bins) {
        cmd_figure_data(run_dir, std::move(theta), bins);
      },
      py::arg("run_dir"), py::arg("theta") = std::nullopt, py::arg("bins") = 50);
}
