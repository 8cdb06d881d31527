#include "simile/commands.hpp"
#include "simile/csv.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace simile;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("simile_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

const char* kNormalConfig = R"({
  "model": "normal",
  "theta": [0.0],
  "n_obs": 25,
  "data": "data.csv",
  "n_int": 20,
  "n_sim": 150000,
  "priors": [{"family": "normal", "m": 1.0, "s": 10.0}],
  "chain": {"n_burn": 100, "n_keep": 300, "scales": [0.4]},
  "seed": 99,
  "output_dir": "out"
})";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIMILE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("config parsing, defaults and path resolution") {
    const auto c = parse_config(nlohmann::json::parse(R"({"model": "network", "data": "d.csv"})"), "/base");
    CHECK(c.n_int == 100);
    CHECK(c.n_sim == 10'000'000);
    CHECK(c.effective_n_obs() == 300);
    CHECK(c.data == fs::path("/base/d.csv"));
    CHECK(c.effective_priors().size() == 3);
    CHECK(c.likelihood == LikelihoodMode::simile);
    CHECK(parse_config(nlohmann::json::parse(R"({"model": "indirect", "n_sim": 1e5})")).n_sim == 100000);
    CHECK(default_priors(ModelId::flowgraph02, 7).size() == 7);
    CHECK(default_priors(ModelId::flowgraph02, 7)[6].family == PriorFamily::logit_normal);

    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"model": "weibull"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"data": "x"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"model": "normal", "n_int": 0})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"model": "normal", "likelihood": "magic"})")),
                    ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

    const auto round = parse_config(c.to_json());
    CHECK(round.to_json() == c.to_json());
  }

  TEST_CASE("generate writes data with a provenance header") {
    const auto dir = fresh_dir("generate");
    auto config = load_config(write_config(dir, kNormalConfig));
    cmd_generate(config);
    const auto table = read_csv(dir / "data.csv");
    CHECK(table.values.rows() == 25);
    CHECK(table.header == std::vector<std::string>{"y"});
    REQUIRE(table.comments.size() >= 3);
    CHECK(table.comments[0] == "model=normal");
    CHECK(table.comments[2] == "seed=99");

    config.model = ModelId::flowgraph02;
    config.theta = {6.0, 136.0 / 13.0, 4.0, 16.0 / 7.0, 10.0, 100.0 / 12.0, 0.4};
    config.priors.clear();
    config.data = dir / "t02.csv";
    config.components = dir / "comp.json";
    cmd_generate(config);
    CHECK(read_csv(dir / "t02.csv").values.rows() == 25);
    std::ifstream in(dir / "comp.json");
    const auto comp = FlowgraphComponentData::from_json(nlohmann::json::parse(in));
    CHECK(comp.t01.size() == 28);
    CHECK(comp.t10.size() == 11);
    CHECK(comp.t12.size() == 17);

    config.theta.clear();
    CHECK_THROWS_AS(generate_data(config), ConfigError);
  }

  TEST_CASE("run outputs are byte-identical across repeats and worker counts") {
    const auto dir = fresh_dir("determinism");
    auto config = load_config(write_config(dir, kNormalConfig));
    cmd_generate(config);
    config.output_dir = dir / "a";
    cmd_run(config);
    config.output_dir = dir / "b";
    cmd_run(config);
    config.output_dir = dir / "c";
    config.workers = 3;
    cmd_run(config);
    for (const char* f : {"trace.csv", "summary.csv", "summary.txt"}) {
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
      CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }
    CHECK(slurp(dir / "a" / "grid.json") == slurp(dir / "c" / "grid.json"));
    std::ifstream meta(dir / "a" / "run.json");
    const auto j = nlohmann::json::parse(meta);
    CHECK(j.at("config").at("seed") == 99);
    CHECK(j.contains("neg_inf_rejections"));
  }

  TEST_CASE("figure data") {
    const auto dir = fresh_dir("figures");
    auto config = load_config(write_config(dir, kNormalConfig));
    cmd_generate(config);
    cmd_run(config);
    cmd_figure_data(dir / "out", std::nullopt, 40);
    const auto figs = dir / "out" / "figures";
    const auto grid = IntervalGrid::from_json(nlohmann::json::parse(slurp(dir / "out" / "grid.json")));
    const auto freq = read_csv(figs / "frequencies.csv");
    CHECK(static_cast<std::size_t>(freq.values.rows()) == grid.cell_count());
    CHECK(freq.values.col(2).sum() == doctest::Approx(1.0));
    CHECK(freq.values.col(3).sum() == doctest::Approx(1.0));
    const auto hist = read_csv(figs / "posterior_hist_mu.csv");
    CHECK(hist.values.rows() == 40);
    double integral = 0;
    for (Eigen::Index r = 0; r < hist.values.rows(); ++r) {
      integral += hist.values(r, 2) * (hist.values(r, 1) - hist.values(r, 0));
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(slurp(figs / "trace.csv") == slurp(dir / "out" / "trace.csv"));
    CHECK(read_csv(figs / "observed_cells.csv").values.rows() == 25);
    CHECK_THROWS_AS(cmd_figure_data(dir / "missing"), ConfigError);
  }

  TEST_CASE("tune reports one block per setting") {
    const auto dir = fresh_dir("tune");
    auto config = load_config(write_config(dir, kNormalConfig));
    config.tune.n_int = {10, 20};
    config.tune.n_sim = {20000};
    config.chain.n_burn = 50;
    config.chain.n_keep = 100;
    const auto cells = cmd_tune(config);
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].method == "exact");
    CHECK(cells[1].n_int == 10);
    for (const auto& c : cells) CHECK(c.ok);
    const auto table = format_tune_table(cells);
    CHECK(table.find("nInt=20, nSim=20000") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "tune.csv"));
  }

  TEST_CASE("chain that never accepts is reported") {
    const auto dir = fresh_dir("stuck");
    auto config = load_config(write_config(dir, kNormalConfig));
    cmd_generate(config);
    config.n_int = 2000;
    config.n_sim = 50;
    config.chain.initial = {0.0};
    CHECK_THROWS_AS(cmd_run(config), NumericalError);
  }

  TEST_CASE("command-line exit codes") {
    const auto dir = fresh_dir("cli");
    const auto cfg = write_config(dir, kNormalConfig);
    CHECK(run_cli("generate " + cfg.string()) == 0);
    CHECK(run_cli("run " + cfg.string() + " --n-keep 50 --n-burn 10") == 0);
    CHECK(run_cli("figure-data " + (dir / "out").string()) == 0);
    CHECK(run_cli("run " + (dir / "missing.json").string()) == 1);
    CHECK(run_cli("run " + cfg.string() + " --likelihood magic") == 1);
    CHECK(run_cli("frobnicate") == 1);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK(run_cli("run " + (dir / "bad.json").string()) == 1);
    // infeasible start: sigma must be positive
    std::ofstream(dir / "neg.json") << R"({"model": "lognormal", "data": "data.csv", "priors": [
      {"family": "normal", "m": 0, "s": 1}, {"family": "lognormal", "m": 0, "s": 1}],
      "chain": {"initial": [0.0, -1.0]}})";
    CHECK(run_cli("run " + (dir / "neg.json").string()) == 2);
    CHECK(run_cli("run " + cfg.string() + " --n-int 2000 --n-sim 50 --output-dir " + (dir / "stuck").string()) == 2);
  }
}
