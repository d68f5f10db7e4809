#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "noiseforge/image.hpp"
#include "noiseforge/random.hpp"

namespace noiseforge {

inline constexpr double kDefaultPhotonsAtUnitSeverity = 1000.0;
inline constexpr double kDefaultReadoutSigma = 0.1;

/// Severity pair and calibration constants for one corruption.
///
/// A severity of 0 omits that noise source. Quantum severity is otherwise
/// anchored at s_q = 1 (n0 photons per pixel), so values in (0, 1) are
/// rejected as uncalibrated.
struct NoiseSpec {
  double s_q = 0.0;
  double s_e = 0.0;
  double n0 = kDefaultPhotonsAtUnitSeverity;
  double sigma0 = kDefaultReadoutSigma;
  std::uint64_t seed = 0;

  bool quantum_active() const { return s_q > 0.0; }
  bool electronic_active() const { return s_e > 0.0; }

  /// Throws DomainError when an invariant is violated.
  void validate() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// `key = value` lines for s_q, s_e, n0, sigma0, seed. Doubles are written
/// with round-trip precision.
std::string to_config_text(const NoiseSpec& spec);

/// Parses the block written by to_config_text(). Missing keys keep their
/// defaults; unknown keys and malformed values raise ParseError.
NoiseSpec parse_noise_spec(std::string_view text);

/// Mean photons per pixel, n0 / s_q^2. Requires s_q >= 1.
double photon_budget(double s_q, double n0);

/// Readout noise standard deviation, sigma0 * s_e.
double sigma_e(double s_e, double sigma0);

/// sqrt(I * n0) / s_q for a pixel of intensity I.
double theoretical_snr_quantum(double intensity, const NoiseSpec& spec);

/// I / (sigma0 * s_e).
double theoretical_snr_electronic(double intensity, const NoiseSpec& spec);

/// Exact Poisson variate: sequential-search inversion below lambda = 10,
/// Hormann's transformed rejection (PTRS) above.
std::uint64_t sample_poisson(double lambda, CounterStream& stream);

/// Standard normal variate via Box-Muller (cosine branch only, two uniforms).
double sample_standard_normal(CounterStream& stream);

/// Signature shared by Poisson samplers; lets validation swap in a faulty one.
using PoissonSampler = std::uint64_t (*)(double, CounterStream&);

/// Q = P / N_ph with P ~ Poisson(I * N_ph), N_ph = photon_budget(s_q, n0).
/// Unclamped. Requires spec.s_q >= 1.
IntensityField inject_quantum(const NormalizedImage& img, const NoiseSpec& spec,
                              std::string_view image_id = {},
                              PoissonSampler sampler = sample_poisson);

/// Zero-mean readout noise eps ~ N(0, (sigma0 * s_e)^2), i.i.d. per pixel.
/// All zeros when s_e = 0.
IntensityField readout_noise(Extent extent, const NoiseSpec& spec, std::string_view image_id = {});

/// E = base + eps with eps ~ N(0, (sigma0 * s_e)^2) i.i.d. per pixel.
/// Unclamped. s_e = 0 returns the base values unchanged.
IntensityField inject_electronic(const IntensityField& base, const NoiseSpec& spec,
                                 std::string_view image_id = {});
IntensityField inject_electronic(const NormalizedImage& img, const NoiseSpec& spec,
                                 std::string_view image_id = {});

struct NoiseRealization {
  /// Clamped output of the stage chain.
  NormalizedImage corrupted;
  /// Per-pixel Q values when the quantum stage ran.
  std::optional<IntensityField> quantum_field;
  /// Per-pixel additive readout noise when the electronic stage ran.
  std::optional<IntensityField> electronic_field;
};

/// Quantum stage (if s_q >= 1), then electronic stage (if s_e > 0) applied to
/// the quantum output, then a single clamp into [0, 1]. The two stages draw
/// from disjoint stream families keyed by (spec.seed, image_id).
NoiseRealization inject(const NormalizedImage& img, const NoiseSpec& spec,
                        std::string_view image_id = {});

}  // namespace noiseforge
