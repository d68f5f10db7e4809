#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noiseforge/image.hpp"
#include "noiseforge/metrics.hpp"

namespace noiseforge {

enum class TaskKind { segmentation, binary_classification };

struct CorpusEntry {
  std::string image_id;
  std::string patient_id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  std::optional<bool> label;
  std::string source_tag;
};

struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  TaskKind task_kind = TaskKind::segmentation;
  std::vector<std::string> class_names;

  const CorpusEntry* find(std::string_view image_id) const;
  /// Distinct patient ids, sorted.
  std::vector<std::string> patients() const;
};

inline constexpr std::string_view kManifestHeader =
    "image_id,patient_id,image_path,mask_path,label,source_tag";

/// Parses manifest text. Relative image and mask paths resolve against
/// `base_dir`. Throws ParseError (with line number) on malformed rows,
/// duplicate image ids, or entries missing the field their task requires.
CorpusManifest parse_manifest(std::string_view text, TaskKind task,
                              const std::filesystem::path& base_dir = {},
                              std::string_view source_name = "manifest");
CorpusManifest read_manifest(const std::filesystem::path& path, TaskKind task);

enum class Split { train, val, test };

std::string_view split_name(Split split);

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;

  std::array<double, 3> as_array() const { return {train, val, test}; }
  /// Finite, nonnegative, summing to 1 within 1e-9. Throws DomainError.
  void validate() const;
};

/// patient_id -> split.
using SplitAssignment = std::map<std::string, Split>;

/// Patient-level split. Patients are sorted by id and shuffled with a stream
/// derived from `seed`, so the result does not depend on manifest order.
/// Per-split patient counts use largest-remainder apportionment. With
/// `stratify_by_label`, positive patients (any positive image) are
/// apportioned in proportion to each split's size, so every split's positive
/// count is within one patient of the global prevalence.
SplitAssignment split_corpus(const CorpusManifest& manifest, const SplitFractions& fractions,
                             std::uint64_t seed, bool stratify_by_label);

/// `patient_id,split` rows with a header, sorted by patient id.
std::string format_split(const SplitAssignment& assignment);
SplitAssignment parse_split(std::string_view text, std::string_view source_name = "split");

/// Largest-remainder apportionment of `total` items over `weights` (which sum
/// to 1). Ties in the fractional part go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

/// Ids of entries whose patient is in `split`; every entry if `assignment`
/// is empty. Manifest order.
std::vector<std::string> entries_in_split(const CorpusManifest& manifest,
                                          const SplitAssignment& assignment, Split split);

struct GroundTruth {
  std::map<std::string, BinaryMask> masks;
  std::map<std::string, bool> labels;
};

/// Loads masks (segmentation) or labels (classification) for `ids`. Masks
/// are resampled with nearest-neighbour when `target` is set.
GroundTruth load_ground_truth(const CorpusManifest& manifest, const std::vector<std::string>& ids,
                              std::optional<Extent> target = std::nullopt);

inline constexpr std::string_view kScoresFileName = "scores.csv";

struct PredictionLoad {
  std::map<std::string, BinaryMask> masks;
  std::map<std::string, ScoredSample> scores;
  /// Entries with no prediction, in request order.
  std::vector<std::string> missing;

  std::size_t loaded() const { return masks.size() + scores.size(); }
};

/// Reads external predictions for `ids` from `pred_dir`.
///
/// Segmentation: `<pred_dir>/<image_id>.png` (or `.pgm`), nonzero =
/// foreground; a dimension mismatch with the ground truth throws ShapeError
/// naming the entry. Classification: `<pred_dir>/scores.csv` with rows
/// `sample_id,score,label`; malformed, out-of-range, or label-inconsistent
/// rows throw ParseError with file and line. Absent files never throw; the
/// affected ids are listed in `missing`.
PredictionLoad load_predictions(const CorpusManifest& manifest,
                                const std::filesystem::path& pred_dir,
                                const std::vector<std::string>& ids, const GroundTruth& truth);

/// Parses one `sample_id,score,label` row.
struct ScoreRow {
  std::string sample_id;
  ScoredSample sample;
};
ScoreRow parse_score_row(std::string_view line, std::string_view source_name, std::size_t line_no);

}  // namespace noiseforge
