#include "noiseforge/noise.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) throw DomainError(fmt::format("{} must be finite, got {}", name, value));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view value, std::size_t line) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ParseError(fmt::format("noise spec line {}: malformed number '{}'", line, value));
  }
  return out;
}

std::uint64_t sample_poisson_inversion(double lambda, CounterStream& stream) {
  const double u = stream.uniform();
  std::uint64_t k = 0;
  double p = std::exp(-lambda);
  double cdf = p;
  while (u > cdf) {
    ++k;
    p *= lambda / static_cast<double>(k);
    // Remaining tail mass is below double resolution.
    if (p == 0.0) break;
    cdf += p;
  }
  return k;
}

// Hormann (1993), "The transformed rejection method for generating Poisson
// random variables", algorithm PTRS.
std::uint64_t sample_poisson_ptrs(double lambda, CounterStream& stream) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = stream.uniform() - 0.5;
    const double v = stream.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

}  // namespace

void NoiseSpec::validate() const {
  require_finite(s_q, "s_q");
  require_finite(s_e, "s_e");
  require_finite(n0, "n0");
  require_finite(sigma0, "sigma0");
  if (s_q < 0.0) throw DomainError(fmt::format("s_q must be >= 0, got {}", s_q));
  if (s_q > 0.0 && s_q < 1.0) {
    throw DomainError(fmt::format(
        "s_q = {} lies below the calibration anchor; use 0 (omitted) or a value >= 1", s_q));
  }
  if (s_e < 0.0) throw DomainError(fmt::format("s_e must be >= 0, got {}", s_e));
  if (n0 <= 0.0) throw DomainError(fmt::format("n0 must be > 0, got {}", n0));
  if (sigma0 < 0.0) throw DomainError(fmt::format("sigma0 must be >= 0, got {}", sigma0));
}

std::string to_config_text(const NoiseSpec& spec) {
  return fmt::format("s_q = {}\ns_e = {}\nn0 = {}\nsigma0 = {}\nseed = {}\n", spec.s_q, spec.s_e,
                     spec.n0, spec.sigma0, spec.seed);
}

NoiseSpec parse_noise_spec(std::string_view text) {
  NoiseSpec spec;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(fmt::format("noise spec line {}: expected 'key = value'", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "s_q") {
      spec.s_q = parse_double(value, line_no);
    } else if (key == "s_e") {
      spec.s_e = parse_double(value, line_no);
    } else if (key == "n0") {
      spec.n0 = parse_double(value, line_no);
    } else if (key == "sigma0") {
      spec.sigma0 = parse_double(value, line_no);
    } else if (key == "seed") {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), spec.seed);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ParseError(fmt::format("noise spec line {}: malformed seed '{}'", line_no, value));
      }
    } else {
      throw ParseError(fmt::format("noise spec line {}: unknown key '{}'", line_no, key));
    }
  }
  return spec;
}

double photon_budget(double s_q, double n0) {
  require_finite(s_q, "s_q");
  if (s_q < 1.0) {
    throw DomainError(fmt::format("photon budget needs s_q >= 1, got {}", s_q));
  }
  if (!(n0 > 0.0)) throw DomainError(fmt::format("n0 must be > 0, got {}", n0));
  return n0 / (s_q * s_q);
}

double sigma_e(double s_e, double sigma0) {
  require_finite(s_e, "s_e");
  if (s_e < 0.0) throw DomainError(fmt::format("s_e must be >= 0, got {}", s_e));
  return sigma0 * s_e;
}

double theoretical_snr_quantum(double intensity, const NoiseSpec& spec) {
  if (!(intensity > 0.0)) {
    throw DegenerateInputError("quantum SNR is undefined for zero intensity");
  }
  if (spec.s_q < 1.0) throw DomainError(fmt::format("quantum SNR needs s_q >= 1, got {}", spec.s_q));
  return std::sqrt(intensity * spec.n0) / spec.s_q;
}

double theoretical_snr_electronic(double intensity, const NoiseSpec& spec) {
  if (!(spec.s_e > 0.0) || !(spec.sigma0 > 0.0)) {
    throw DegenerateInputError("electronic SNR is undefined when s_e or sigma0 is zero");
  }
  return intensity / (spec.sigma0 * spec.s_e);
}

std::uint64_t sample_poisson(double lambda, CounterStream& stream) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw DomainError(fmt::format("Poisson mean must be finite and >= 0, got {}", lambda));
  }
  if (lambda == 0.0) return 0;
  if (lambda < 10.0) return sample_poisson_inversion(lambda, stream);
  return sample_poisson_ptrs(lambda, stream);
}

double sample_standard_normal(CounterStream& stream) {
  const double u1 = stream.uniform_positive();
  const double u2 = stream.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

IntensityField inject_quantum(const NormalizedImage& img, const NoiseSpec& spec,
                              std::string_view image_id, PoissonSampler sampler) {
  spec.validate();
  const double n_ph = photon_budget(spec.s_q, spec.n0);
  const std::uint64_t key = image_stream_key(spec.seed, image_id);
  const auto pixels = img.pixels();
  IntensityField out{img.extent(), std::vector<double>(pixels.size())};
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    auto stream = CounterStream::for_pixel(key, StreamTag::quantum, i);
    const auto count = sampler(pixels[i] * n_ph, stream);
    out.values[i] = static_cast<double>(count) / n_ph;
  }
  return out;
}

IntensityField readout_noise(Extent extent, const NoiseSpec& spec, std::string_view image_id) {
  spec.validate();
  IntensityField eps{extent, std::vector<double>(extent.area(), 0.0)};
  if (!spec.electronic_active()) return eps;
  const double sigma = sigma_e(spec.s_e, spec.sigma0);
  const std::uint64_t key = image_stream_key(spec.seed, image_id);
  for (std::size_t i = 0; i < eps.values.size(); ++i) {
    auto stream = CounterStream::for_pixel(key, StreamTag::electronic, i);
    eps.values[i] = sigma * sample_standard_normal(stream);
  }
  return eps;
}

IntensityField inject_electronic(const IntensityField& base, const NoiseSpec& spec,
                                 std::string_view image_id) {
  spec.validate();
  if (!spec.electronic_active()) return base;
  const IntensityField eps = readout_noise(base.extent, spec, image_id);
  IntensityField out = base;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += eps.values[i];
  return out;
}

IntensityField inject_electronic(const NormalizedImage& img, const NoiseSpec& spec,
                                 std::string_view image_id) {
  return inject_electronic(
      IntensityField{img.extent(), std::vector<double>(img.pixels().begin(), img.pixels().end())},
      spec, image_id);
}

NoiseRealization inject(const NormalizedImage& img, const NoiseSpec& spec,
                        std::string_view image_id) {
  spec.validate();
  if (!spec.quantum_active() && !spec.electronic_active()) {
    return NoiseRealization{img, std::nullopt, std::nullopt};
  }

  std::optional<IntensityField> quantum;
  IntensityField stage{img.extent(), std::vector<double>(img.pixels().begin(), img.pixels().end())};
  if (spec.quantum_active()) {
    quantum = inject_quantum(img, spec, image_id);
    stage = *quantum;
  }

  std::optional<IntensityField> electronic;
  if (spec.electronic_active()) {
    electronic = readout_noise(img.extent(), spec, image_id);
    for (std::size_t i = 0; i < stage.values.size(); ++i) stage.values[i] += electronic->values[i];
  }

  return NoiseRealization{clamp_to_unit(stage), std::move(quantum), std::move(electronic)};
}

}  // namespace noiseforge
