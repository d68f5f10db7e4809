#include "noiseforge/noise_validation.hpp"

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

constexpr double kCltSigmas = 3.0;
constexpr double kVarianceRelTol = 0.02;
constexpr double kStdRelTol = 0.01;
constexpr double kSnrRatioRelTol = 0.03;
constexpr double kMinExpectedPerBin = 5.0;

double poisson_pmf(double lambda, std::uint64_t k) {
  const auto kd = static_cast<double>(k);
  return std::exp(kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0));
}

StatCheck within(std::string name, double measured, double expected, double tolerance) {
  return StatCheck{std::move(name), measured, expected, tolerance,
                   std::fabs(measured - expected) <= tolerance};
}

Extent field_extent(std::size_t samples) {
  // One row keeps any sample count exact.
  return Extent{1, samples};
}

}  // namespace

SampleMoments sample_moments(std::span<const double> values) {
  SampleMoments m;
  m.count = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return m;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.variance = ss / static_cast<double>(values.size() - 1);
  return m;
}

GoodnessOfFit poisson_goodness_of_fit(double lambda, std::size_t draws, std::uint64_t seed,
                                      PoissonSampler sampler) {
  if (!(lambda > 0.0)) throw DomainError("goodness of fit needs lambda > 0");
  if (draws == 0) throw DegenerateInputError("goodness of fit needs at least one draw");
  const auto n = static_cast<double>(draws);
  const auto k_max =
      static_cast<std::uint64_t>(std::ceil(lambda + 20.0 * std::sqrt(lambda) + 20.0));

  std::vector<double> expected(k_max + 1);
  for (std::uint64_t k = 0; k <= k_max; ++k) expected[k] = n * poisson_pmf(lambda, k);

  std::vector<double> observed(k_max + 1, 0.0);
  const std::uint64_t key = combine_keys(seed, hash_string(fmt::format("gof:{}", lambda)));
  for (std::size_t i = 0; i < draws; ++i) {
    auto stream = CounterStream::for_pixel(key, StreamTag::quantum, i);
    const auto k = sampler(lambda, stream);
    observed[std::min(k, k_max)] += 1.0;
  }
  // Everything above k_max lands in the last bin, so give it the tail mass too.
  double below = 0.0;
  for (std::uint64_t k = 0; k < k_max; ++k) below += expected[k];
  expected[k_max] = std::max(n - below, 0.0);

  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  std::pair<double, double> open{0.0, 0.0};
  for (std::uint64_t k = 0; k <= k_max; ++k) {
    open.first += observed[k];
    open.second += expected[k];
    if (open.second >= kMinExpectedPerBin) {
      bins.push_back(open);
      open = {0.0, 0.0};
    }
  }
  if (open.second > 0.0 || open.first > 0.0) {
    if (bins.empty()) {
      bins.push_back(open);
    } else {
      bins.back().first += open.first;
      bins.back().second += open.second;
    }
  }
  if (bins.size() < 2) throw DegenerateInputError("too few draws for a chi-square test");

  GoodnessOfFit fit;
  for (const auto& [obs, exp] : bins) fit.chi_square += (obs - exp) * (obs - exp) / exp;
  fit.degrees_of_freedom = bins.size() - 1;
  fit.p_value = boost::math::gamma_q(static_cast<double>(fit.degrees_of_freedom) / 2.0,
                                     fit.chi_square / 2.0);
  return fit;
}

std::vector<StatCheck> run_noise_validation(const NoiseValidationConfig& config) {
  if (config.samples < 2) throw DegenerateInputError("validation needs at least two samples");
  const Extent extent = field_extent(config.samples);
  const auto image = NormalizedImage::filled(extent, config.intensity);
  const auto n = static_cast<double>(config.samples);
  const double intensity = config.intensity;

  std::vector<StatCheck> checks;

  double reference_snr = 0.0;
  for (std::size_t idx = 0; idx < config.quantum_levels.size(); ++idx) {
    const double s_q = config.quantum_levels[idx];
    const NoiseSpec spec{s_q, 0.0, config.n0, config.sigma0, config.seed};
    const auto field = inject_quantum(image, spec, "validation/quantum", config.sampler);
    const auto m = sample_moments(field.values);
    const double var_theory = intensity * s_q * s_q / config.n0;
    checks.push_back(within(fmt::format("quantum mean s_q={}", s_q), m.mean, intensity,
                            kCltSigmas * std::sqrt(var_theory / n)));
    checks.push_back(within(fmt::format("quantum variance s_q={}", s_q), m.variance, var_theory,
                            kVarianceRelTol * var_theory));
    const double snr = m.variance > 0.0 ? m.mean / std::sqrt(m.variance) : INFINITY;
    if (idx == 0) {
      reference_snr = snr;
    } else {
      const double expected = config.quantum_levels.front() / s_q;
      checks.push_back(within(
          fmt::format("quantum SNR ratio s_q={}/{}", s_q, config.quantum_levels.front()),
          snr / reference_snr, expected, kSnrRatioRelTol * expected));
    }
  }

  for (std::size_t idx = 0; idx < config.electronic_levels.size(); ++idx) {
    const double s_e = config.electronic_levels[idx];
    const NoiseSpec spec{0.0, s_e, config.n0, config.sigma0, config.seed};
    const auto readout = inject_electronic(image, spec, "validation/electronic");
    std::vector<double> eps(readout.values.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = readout.values[i] - intensity;
    const auto m_eps = sample_moments(eps);
    const auto m_e = sample_moments(readout.values);
    const double sigma = sigma_e(s_e, config.sigma0);
    checks.push_back(within(fmt::format("electronic std s_e={}", s_e), std::sqrt(m_eps.variance),
                            sigma, kStdRelTol * sigma));
    checks.push_back(within(fmt::format("electronic mean s_e={}", s_e), m_e.mean, intensity,
                            kCltSigmas * sigma / std::sqrt(n)));
    const double snr = m_e.mean / std::sqrt(m_e.variance);
    if (idx == 0) {
      reference_snr = snr;
    } else {
      const double expected = config.electronic_levels.front() / s_e;
      checks.push_back(within(
          fmt::format("electronic SNR ratio s_e={}/{}", s_e, config.electronic_levels.front()),
          snr / reference_snr, expected, kSnrRatioRelTol * expected));
    }
  }

  for (double lambda : config.poisson_lambdas) {
    const auto fit = poisson_goodness_of_fit(lambda, config.poisson_draws, config.seed, config.sampler);
    checks.push_back(StatCheck{fmt::format("poisson chi-square lambda={} (df={})", lambda,
                                           fit.degrees_of_freedom),
                               fit.p_value, 1.0, config.gof_p_floor,
                               fit.p_value > config.gof_p_floor});
  }
  return checks;
}

std::uint64_t faulty_poisson_sampler(double lambda, CounterStream&) {
  return static_cast<std::uint64_t>(std::llround(lambda));
}

}  // namespace noiseforge
