#include "simile/models.hpp"

#include "parallel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace simile {

namespace {

constexpr std::size_t kMaxLoops = 10000;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

class NormalSimulator final : public Simulator {
 public:
  NormalSimulator(double mu, double sigma) : mu_(mu), sigma_(sigma) {}
  std::size_t dim() const override { return 1; }
  void fill(Engine& engine, std::span<double> out) const override {
    std::normal_distribution<double> z(mu_, sigma_);
    for (double& v : out) v = z(engine);
  }

 private:
  double mu_, sigma_;
};

class LognormalSimulator final : public Simulator {
 public:
  LognormalSimulator(double mu, double sigma) : mu_(mu), sigma_(sigma) {}
  std::size_t dim() const override { return 1; }
  void fill(Engine& engine, std::span<double> out) const override {
    std::normal_distribution<double> z(mu_, sigma_);
    for (double& v : out) v = std::exp(z(engine));
  }

 private:
  double mu_, sigma_;
};

// y = x |sin(angle)|, x ~ Lognormal(mu, sigma), angle ~ Uniform(0, 2 pi).
class IndirectSimulator final : public Simulator {
 public:
  IndirectSimulator(double mu, double sigma) : mu_(mu), sigma_(sigma) {}
  std::size_t dim() const override { return 1; }
  void fill(Engine& engine, std::span<double> out) const override {
    std::normal_distribution<double> z(mu_, sigma_);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (double& v : out) {
      const double x = std::exp(z(engine));
      v = x * std::abs(std::sin(angle(engine)));
    }
  }

 private:
  double mu_, sigma_;
};

class FlowgraphSimulator final : public Simulator {
 public:
  explicit FlowgraphSimulator(const FlowgraphParams& p) : params_(p) {}
  std::size_t dim() const override { return 1; }
  void fill(Engine& engine, std::span<double> out) const override {
    const auto a = params_.g01();
    const auto b = params_.g10();
    const auto c = params_.g12();
    std::gamma_distribution<double> g01(a.shape, 1.0 / a.rate);
    std::gamma_distribution<double> g10(b.shape, 1.0 / b.rate);
    std::gamma_distribution<double> g12(c.shape, 1.0 / c.rate);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : out) {
      double t = g01(engine);
      std::size_t loops = 0;
      while (u(engine) < params_.p) {
        if (++loops > kMaxLoops) throw NumericalError("simulate_flowgraph02: loop count exceeded 10^4");
        t += g10(engine) + g01(engine);
      }
      v = t + g12(engine);
    }
  }

 private:
  FlowgraphParams params_;
};

class NetworkSimulator final : public Simulator {
 public:
  NetworkSimulator(double l1, double l2, double l3) : l1_(l1), l2_(l2), l3_(l3) {}
  std::size_t dim() const override { return 2; }
  void fill(Engine& engine, std::span<double> out) const override {
    std::exponential_distribution<double> x1(l1_), x2(l2_), x3(l3_);
    for (std::size_t i = 0; i + 1 < out.size(); i += 2) {
      const double shared = x1(engine);
      out[i] = shared + x2(engine);
      out[i + 1] = shared + x3(engine);
    }
  }

 private:
  double l1_, l2_, l3_;
};

}  // namespace

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::normal: return "normal";
    case ModelId::lognormal: return "lognormal";
    case ModelId::indirect: return "indirect";
    case ModelId::flowgraph02: return "flowgraph02";
    case ModelId::network: return "network";
  }
  return "unknown";
}

ModelId model_from_string(const std::string& name) {
  if (name == "normal") return ModelId::normal;
  if (name == "lognormal") return ModelId::lognormal;
  if (name == "indirect") return ModelId::indirect;
  if (name == "flowgraph02" || name == "flowgraph") return ModelId::flowgraph02;
  if (name == "network") return ModelId::network;
  throw ConfigError("unknown model '" + name + "'");
}

std::size_t output_dim(ModelId id) { return id == ModelId::network ? 2 : 1; }

std::vector<Support> output_support(ModelId id) {
  switch (id) {
    case ModelId::normal: return {Support::real_line()};
    case ModelId::network: return {Support::positive(), Support::positive()};
    default: return {Support::positive()};
  }
}

std::vector<std::string> param_names(ModelId id, std::size_t n_params) {
  switch (id) {
    case ModelId::normal:
      return n_params == 1 ? std::vector<std::string>{"mu"} : std::vector<std::string>{"mu", "sigma"};
    case ModelId::lognormal:
    case ModelId::indirect: return {"mu", "sigma"};
    case ModelId::flowgraph02: return {"mu01", "var01", "mu10", "var10", "mu12", "var12", "p"};
    case ModelId::network: return {"lambda1", "lambda2", "lambda3"};
  }
  return {};
}

std::vector<ParamSupport> param_supports(ModelId id, std::size_t n_params) {
  using enum ParamSupport;
  switch (id) {
    case ModelId::normal:
      return n_params == 1 ? std::vector<ParamSupport>{real} : std::vector<ParamSupport>{real, positive};
    case ModelId::lognormal:
    case ModelId::indirect: return {real, positive};
    case ModelId::flowgraph02: return {positive, positive, positive, positive, positive, positive, unit};
    case ModelId::network: return {positive, positive, positive};
  }
  return {};
}

void validate(const ModelSpec& model) {
  const auto& t = model.theta;
  for (double v : t) require(std::isfinite(v), "model parameters must be finite");
  switch (model.id) {
    case ModelId::normal:
      require(t.size() == 1 || t.size() == 2, "normal model takes [mu] or [mu, sigma]");
      if (t.size() == 2) require(t[1] > 0, "normal model: sigma must be > 0");
      break;
    case ModelId::lognormal:
    case ModelId::indirect:
      require(t.size() == 2, "model takes [mu, sigma]");
      require(t[1] > 0, "sigma must be > 0");
      break;
    case ModelId::flowgraph02:
      require(t.size() == 7, "flowgraph02 takes [mu01, var01, mu10, var10, mu12, var12, p]");
      for (std::size_t i = 0; i < 6; ++i) require(t[i] > 0, "flowgraph02: means and variances must be > 0");
      require(t[6] > 0 && t[6] < 1, "flowgraph02: p must be in (0, 1)");
      break;
    case ModelId::network:
      require(t.size() == 3, "network takes [lambda1, lambda2, lambda3]");
      for (double v : t) require(v > 0, "network: rates must be > 0");
      break;
  }
}

FlowgraphParams FlowgraphParams::from_theta(std::span<const double> theta) {
  require(theta.size() == 7, "flowgraph02 takes 7 parameters");
  return {theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6]};
}

double FlowgraphParams::first_passage_variance() const {
  const double loops_mean = p / (1 - p);
  const double loops_var = p / ((1 - p) * (1 - p));
  const double excursion_mean = mu10 + mu01;
  return var01 + var12 + loops_mean * (var10 + var01) + loops_var * excursion_mean * excursion_mean;
}

std::unique_ptr<Simulator> make_simulator(const ModelSpec& model) {
  validate(model);
  const auto& t = model.theta;
  switch (model.id) {
    case ModelId::normal: return std::make_unique<NormalSimulator>(t[0], t.size() == 2 ? t[1] : 1.0);
    case ModelId::lognormal: return std::make_unique<LognormalSimulator>(t[0], t[1]);
    case ModelId::indirect: return std::make_unique<IndirectSimulator>(t[0], t[1]);
    case ModelId::flowgraph02: return std::make_unique<FlowgraphSimulator>(FlowgraphParams::from_theta(t));
    case ModelId::network: return std::make_unique<NetworkSimulator>(t[0], t[1], t[2]);
  }
  throw std::invalid_argument("make_simulator: unknown model");
}

Matrix simulate(const Simulator& sim, std::size_t n, const RngStream& stream, std::size_t workers) {
  require(n >= 1, "simulate: n must be >= 1");
  const std::size_t d = sim.dim();
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
  detail::for_each_chunk(n_chunks, workers, [&](std::size_t, std::size_t c) {
    const std::size_t begin = c * kChunkSize;
    const std::size_t count = std::min(kChunkSize, n - begin);
    Engine engine = stream.engine(c);
    sim.fill(engine, {out.data() + begin * d, count * d});
  });
  return out;
}

Matrix simulate(const ModelSpec& model, std::size_t n, const RngStream& stream, std::size_t workers) {
  return simulate(*make_simulator(model), n, stream, workers);
}

namespace {
std::vector<double> as_vector(const Matrix& m) { return {m.data(), m.data() + m.size()}; }
}  // namespace

std::vector<double> simulate_indirect(double mu, double sigma, std::size_t n, const RngStream& stream) {
  return as_vector(simulate(ModelSpec{ModelId::indirect, {mu, sigma}}, n, stream));
}

std::vector<double> simulate_flowgraph02(const FlowgraphParams& params, std::size_t n,
                                         const RngStream& stream) {
  return as_vector(simulate(ModelSpec{ModelId::flowgraph02, params.to_theta()}, n, stream));
}

Matrix simulate_network(double lambda1, double lambda2, double lambda3, std::size_t n,
                        const RngStream& stream) {
  return simulate(ModelSpec{ModelId::network, {lambda1, lambda2, lambda3}}, n, stream);
}

FlowgraphComponentData simulate_flowgraph_component_data(const FlowgraphParams& params,
                                                         const FlowgraphCounts& counts,
                                                         const RngStream& stream) {
  auto theta = params.to_theta();
  for (std::size_t i = 0; i < 6; ++i) {
    require(std::isfinite(theta[i]) && theta[i] > 0, "flowgraph component data: means and variances must be > 0");
  }
  require(params.p >= 0 && params.p < 1, "flowgraph component data: p must be in [0, 1)");

  Engine engine = stream.engine(0);
  auto draw = [&engine](GammaShapeRate g, std::size_t n) {
    std::gamma_distribution<double> dist(g.shape, 1.0 / g.rate);
    std::vector<double> v(n);
    for (double& x : v) x = dist(engine);
    return v;
  };
  FlowgraphComponentData data;
  data.t01 = draw(params.g01(), counts.n01);
  data.t10 = draw(params.g10(), counts.n10);
  data.t12 = draw(params.g12(), counts.n12);
  data.n = counts.n01;
  data.x = std::binomial_distribution<std::size_t>(data.n, params.p)(engine);
  return data;
}

nlohmann::json FlowgraphComponentData::to_json() const {
  return {{"t01", t01}, {"t10", t10}, {"t12", t12}, {"x", x}, {"n", n}};
}

FlowgraphComponentData FlowgraphComponentData::from_json(const nlohmann::json& j) {
  FlowgraphComponentData d;
  d.t01 = j.at("t01").get<std::vector<double>>();
  d.t10 = j.at("t10").get<std::vector<double>>();
  d.t12 = j.at("t12").get<std::vector<double>>();
  d.x = j.at("x").get<std::size_t>();
  d.n = j.at("n").get<std::size_t>();
  if (d.x > d.n) throw ConfigError("flowgraph component data: x > n");
  return d;
}

}  // namespace simile
