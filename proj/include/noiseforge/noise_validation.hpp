#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noiseforge/noise.hpp"

namespace noiseforge {

struct SampleMoments {
  double mean = 0.0;
  /// Unbiased (n - 1) sample variance.
  double variance = 0.0;
  std::size_t count = 0;
};

/// Two-pass mean and variance.
SampleMoments sample_moments(std::span<const double> values);

/// One Monte Carlo check against a closed form.
struct StatCheck {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  /// Absolute tolerance on |measured - expected|, or the p-value floor for
  /// goodness-of-fit checks.
  double tolerance = 0.0;
  bool passed = false;
};

struct GoodnessOfFit {
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 0.0;
};

/// Pearson chi-square test of Poisson(lambda) draws against the exact pmf.
/// Adjacent counts are pooled until every bin expects at least 5 draws.
GoodnessOfFit poisson_goodness_of_fit(double lambda, std::size_t draws, std::uint64_t seed,
                                      PoissonSampler sampler = sample_poisson);

struct NoiseValidationConfig {
  double intensity = 0.5;
  std::size_t samples = 1'000'000;
  double n0 = kDefaultPhotonsAtUnitSeverity;
  double sigma0 = kDefaultReadoutSigma;
  std::uint64_t seed = 0;
  /// First entry is the reference for SNR ratios.
  std::vector<double> quantum_levels{1.0, 2.0, 4.0};
  std::vector<double> electronic_levels{2.0, 4.0};
  std::vector<double> poisson_lambdas{0.5, 5.0, 50.0, 500.0};
  std::size_t poisson_draws = 100'000;
  double gof_p_floor = 1e-3;
  PoissonSampler sampler = sample_poisson;
};

/// Monte Carlo moment, SNR-scaling and sampler-exactness checks on a
/// constant field:
///   - quantum mean within 3 standard errors, variance within 2% of I s_q^2 / n0
///   - electronic noise std within 1% of sigma0 s_e, mean within 3 standard errors
///   - measured SNR ratios within 3% of the 1/s scaling
///   - Poisson chi-square p-value above the floor
std::vector<StatCheck> run_noise_validation(const NoiseValidationConfig& config);

/// Zero-variance stand-in for a Poisson sampler (returns round(lambda)).
/// Used as a negative control: validation must reject it.
std::uint64_t faulty_poisson_sampler(double lambda, CounterStream& stream);

}  // namespace noiseforge
