#include "simile/likelihood.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

namespace simile {

namespace {

constexpr double kTruncation = 1e-10;
constexpr double kMaxDeficit = 1e-3;
constexpr std::size_t kMaxOraclePoints = std::size_t{1} << 16;

// Mass of [t_j - h/2, t_j + h/2) clipped at 0, i.e. the variable rounded to
// the nearest lattice point. Rounding errors are zero-mean so sums of
// rounded holding times are not shifted.
std::vector<double> lattice_masses(GammaShapeRate g, double h, std::size_t n, std::size_t padded) {
  std::vector<double> mass(padded, 0.0);
  double prev = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double upper = (static_cast<double>(j) + 0.5) * h;
    const double cdf = boost::math::gamma_p(g.shape, g.rate * upper);
    mass[j] = cdf - prev;
    prev = cdf;
  }
  return mass;
}

}  // namespace

double FirstPassageDensity::pdf_at(double t) const {
  if (pdf.empty() || t < 0.0) return 0.0;
  const double pos = t / step;
  const double last = static_cast<double>(pdf.size() - 1);
  if (pos > last) return 0.0;
  if (pos == last) return pdf.back();
  const auto j = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(j);
  return (1.0 - frac) * pdf[j] + frac * pdf[j + 1];
}

FirstPassageDensity flowgraph_pdf_oracle(const FlowgraphParams& params, double t_max, std::size_t n_points) {
  validate(ModelSpec{ModelId::flowgraph02, params.to_theta()});
  if (!(t_max > 0) || n_points < 2) throw std::invalid_argument("flowgraph_pdf_oracle: bad grid");

  const double h = t_max / static_cast<double>(n_points - 1);
  std::size_t padded = 1;
  while (padded < 2 * n_points) padded <<= 1;

  Eigen::FFT<double> fft;
  using Spectrum = std::vector<std::complex<double>>;
  Spectrum a, b, c;
  fft.fwd(a, lattice_masses(params.g01(), h, n_points, padded));
  fft.fwd(b, lattice_masses(params.g10(), h, n_points, padded));
  fft.fwd(c, lattice_masses(params.g12(), h, n_points, padded));

  const double p = params.p;
  std::size_t loops = 0;
  for (double tail = p; tail >= kTruncation; tail *= p) ++loops;

  // sum_k (1-p) p^k A^{k+1} B^k C, accumulated term by term per frequency
  Spectrum mix(padded);
  for (std::size_t f = 0; f < padded; ++f) {
    const std::complex<double> ratio = p * a[f] * b[f];
    std::complex<double> term = (1.0 - p) * a[f] * c[f];
    std::complex<double> acc = term;
    for (std::size_t k = 1; k <= loops; ++k) {
      term *= ratio;
      acc += term;
    }
    mix[f] = acc;
  }
  Spectrum masses;
  fft.inv(masses, mix);

  FirstPassageDensity out;
  out.step = h;
  out.loop_terms = loops;
  out.pdf.resize(n_points);
  double total = 0.0;
  for (std::size_t j = 0; j < n_points; ++j) {
    const double m = std::max(0.0, masses[j].real());
    total += m;
    out.pdf[j] = m / h;
  }
  out.deficit = 1.0 - total;
  if (out.deficit > kMaxDeficit) {
    std::ostringstream msg;
    msg << "flowgraph_pdf_oracle: grid [0, " << t_max << "] with " << n_points
        << " points misses mass " << out.deficit;
    throw NumericalError(msg.str());
  }
  return out;
}

FirstPassageDensity flowgraph_pdf_oracle(const FlowgraphParams& params, std::span<const double> cover,
                                         std::size_t n_points) {
  double t_max = params.first_passage_mean() + 12.0 * std::sqrt(params.first_passage_variance());
  for (double t : cover) t_max = std::max(t_max, 1.05 * t);
  // Resolve the narrowest holding-time density with at least 8 points per sd.
  const double min_sd = std::sqrt(std::min({params.var01, params.var10, params.var12}));
  const double wanted = std::ceil(t_max / (min_sd / 8.0)) + 1.0;
  if (wanted > static_cast<double>(n_points)) {
    n_points = static_cast<std::size_t>(std::min(wanted, static_cast<double>(kMaxOraclePoints)));
  }
  return flowgraph_pdf_oracle(params, t_max, n_points);
}

}  // namespace simile
