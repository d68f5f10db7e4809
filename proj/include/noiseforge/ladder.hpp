#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noiseforge/corpus.hpp"
#include "noiseforge/noise.hpp"

namespace noiseforge {

enum class Pairing { axis, full };

struct LadderPoint {
  double s_q = 0.0;
  double s_e = 0.0;

  bool is_baseline() const { return s_q == 0.0 && s_e == 0.0; }
  friend bool operator==(const LadderPoint&, const LadderPoint&) = default;
  friend auto operator<=>(const LadderPoint&, const LadderPoint&) = default;
};

/// Severity grid. The default mirrors the published sweep: levels
/// {0, 1, 2, 4, 6, 8, 10} on both axes, swept one axis at a time, plus the
/// joint (1, 1) point.
struct SeverityLadder {
  std::vector<double> quantum_levels{0, 1, 2, 4, 6, 8, 10};
  std::vector<double> electronic_levels{0, 1, 2, 4, 6, 8, 10};
  Pairing pairing = Pairing::axis;
  /// Adds (1, 1) to an axis sweep when both axes contain 1.
  bool include_joint_unit = true;

  /// Levels ascending and unique, 0 on each axis, quantum levels in
  /// {0} u [1, inf). Throws DomainError.
  void validate() const;

  /// Every point, sorted by (s_q, s_e). The baseline comes first.
  std::vector<LadderPoint> points() const;
};

/// `sq<q>_se<e>` with two decimals, e.g. `sq10.00_se0.00`.
std::string point_dir_name(const LadderPoint& point);

/// Per-image, per-point seed. Adding ladder points never changes the seed of
/// an existing (image, point) pair.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view image_id,
                          const LadderPoint& point);

struct SweepIndexEntry {
  std::string image_id;
  LadderPoint point;
  std::uint64_t derived_seed = 0;
  /// Relative to the output directory.
  std::string output_path;
};

struct GenerationFailure {
  std::string image_id;
  std::string message;
};

struct GenerationOptions {
  /// Stretch every image to this extent before injection.
  std::optional<Extent> resample;
  std::size_t jobs = 1;
};

struct GenerationResult {
  /// Sorted by (point, image_id).
  std::vector<SweepIndexEntry> index;
  std::size_t files_written = 0;
  std::size_t files_unchanged = 0;
  std::vector<GenerationFailure> failures;
};

inline constexpr std::string_view kSweepIndexFileName = "sweep_index.csv";

/// For every ladder point and image: load, normalize, resample (if
/// configured), inject, clamp, quantize, and write
/// `<out_dir>/sq<q>_se<e>/<image_id>.png`. Writes the sweep index to
/// `<out_dir>/sweep_index.csv`. Files whose bytes already match are left
/// untouched. Unreadable images are reported in `failures`; the run
/// continues. Output bytes do not depend on `jobs` or manifest order.
GenerationResult generate_corrupted_corpus(const CorpusManifest& manifest,
                                           const SeverityLadder& ladder, const NoiseSpec& spec_base,
                                           const std::filesystem::path& out_dir,
                                           const GenerationOptions& options = {});

/// `image_id,s_q,s_e,derived_seed,output_path` with header.
std::string format_sweep_index(const std::vector<SweepIndexEntry>& index);

enum class Metric { dice, iou, auroc, auprc, f1 };

std::string_view metric_name(Metric metric);

struct EvalRecord {
  std::string task_id;
  LadderPoint point;
  Metric metric = Metric::dice;
  double value = 0.0;
  /// value - value at (0, 0) for the same task and metric.
  double delta = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::string> flags;
};

struct EvalOptions {
  std::string task_id = "task";
  /// Empty: every manifest entry counts as test.
  SplitAssignment split;
  double threshold = 0.5;
  /// Ground-truth masks are nearest-resampled to this extent.
  std::optional<Extent> resample;
  /// Added to every record (e.g. the reference-predictor tag).
  std::vector<std::string> extra_flags;
};

struct EvalResult {
  /// Sorted by (task, s_q, s_e, metric).
  std::vector<EvalRecord> records;
  std::vector<std::string> warnings;
};

/// Metrics per ladder point on the test split, from predictions under
/// `<predictions_root>/sq<q>_se<e>/`. Segmentation yields dice and iou
/// (per-image mean); classification yields auroc, auprc and f1.
/// Missing baseline predictions throw IoError; a missing non-baseline point
/// is skipped with a warning.
EvalResult evaluate_sweep(const CorpusManifest& manifest, const SeverityLadder& ladder,
                          const std::filesystem::path& predictions_root,
                          const EvalOptions& options = {});

/// Records from already-computed per-point values. `values` must contain the
/// baseline for every metric it mentions.
struct PointValue {
  LadderPoint point;
  Metric metric;
  double value;
  std::size_t n_samples;
  std::vector<std::string> flags;
};
std::vector<EvalRecord> make_records(std::string_view task_id, std::vector<PointValue> values);

enum class Axis { quantum, electronic };

std::string_view axis_name(Axis axis);

struct CurvePoint {
  double severity = 0.0;
  double value = 0.0;
  double delta = 0.0;
};

struct RobustnessCurve {
  std::string task_id;
  Axis axis = Axis::quantum;
  Metric metric = Metric::dice;
  /// Ascending severity; the first point is the baseline.
  std::vector<CurvePoint> points;
  /// Values never increase along the axis and the last is below the first.
  bool monotone_degrading = false;
};

/// One curve per (task, axis, metric). Off-axis points such as (1, 1) are
/// not part of any curve. Throws DegenerateInputError on empty input or a
/// missing baseline.
std::vector<RobustnessCurve> build_curves(const std::vector<EvalRecord>& records);

}  // namespace noiseforge
