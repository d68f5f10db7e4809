#include "noiseforge/cli.hpp"

#include <filesystem>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "noiseforge/corpus.hpp"
#include "noiseforge/errors.hpp"
#include "noiseforge/image_io.hpp"
#include "noiseforge/ladder.hpp"
#include "noiseforge/noise.hpp"
#include "noiseforge/noise_validation.hpp"
#include "noiseforge/reference_segmenter.hpp"
#include "noiseforge/report.hpp"
#include "parallel.hpp"

namespace noiseforge {
namespace {

namespace fs = std::filesystem;

constexpr std::size_t kMinValidationSamples = 100'000;
constexpr const char* kRunMetadataFileName = "run_metadata.txt";

/// Flag values a usage error can only be detected from after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

class Logger {
 public:
  Logger(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}

  template <class... Args>
  void info(fmt::format_string<Args...> f, Args&&... args) {
    if (!quiet_) err_ << "[info] " << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
  template <class... Args>
  void warn(fmt::format_string<Args...> f, Args&&... args) {
    err_ << "[warn] " << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
  void error(const std::string& message) { err_ << "[error] " << message << '\n'; }

 private:
  std::ostream& err_;
  bool quiet_;
};

struct NoiseFlags {
  std::uint64_t seed = 0;
  double n0 = kDefaultPhotonsAtUnitSeverity;
  double sigma0 = kDefaultReadoutSigma;
};

struct LadderFlags {
  std::vector<double> sq_levels{0, 1, 2, 4, 6, 8, 10};
  std::vector<double> se_levels{0, 1, 2, 4, 6, 8, 10};
  std::string grid = "axis";
  bool no_joint = false;

  SeverityLadder ladder() const {
    SeverityLadder l;
    l.quantum_levels = sq_levels;
    l.electronic_levels = se_levels;
    l.pairing = grid == "full" ? Pairing::full : Pairing::axis;
    l.include_joint_unit = !no_joint;
    return l;
  }
};

void add_noise_flags(CLI::App* cmd, NoiseFlags& flags) {
  cmd->add_option("--seed", flags.seed, "Global seed; the only source of randomness");
  cmd->add_option("--n0", flags.n0, "Photons per pixel at s_q = 1")->check(CLI::PositiveNumber);
  cmd->add_option("--sigma0", flags.sigma0, "Readout noise std at s_e = 1 (normalized units)")
      ->check(CLI::NonNegativeNumber);
}

void add_ladder_flags(CLI::App* cmd, LadderFlags& flags) {
  cmd->add_option("--sq-levels", flags.sq_levels, "Quantum severity levels")->delimiter(',');
  cmd->add_option("--se-levels", flags.se_levels, "Electronic severity levels")->delimiter(',');
  cmd->add_option("--grid", flags.grid, "Point pairing: axis sweep or full grid")
      ->check(CLI::IsMember({"axis", "full"}));
  cmd->add_flag("--no-joint", flags.no_joint, "Omit the joint (1, 1) point from an axis sweep");
}

std::optional<Extent> parse_size(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t h = 0;
  std::size_t w = 0;
  const auto x = text.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      h = w = std::stoul(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      h = std::stoul(text.substr(0, x), &used);
      if (used != x) throw std::invalid_argument(text);
      w = std::stoul(text.substr(x + 1), &used);
      if (used != text.size() - x - 1) throw std::invalid_argument(text);
    }
  } catch (const std::logic_error&) {
    throw UsageError(fmt::format("--size expects N or HxW, got '{}'", text));
  }
  if (h == 0 || w == 0) throw UsageError("--size must be positive");
  return Extent{h, w};
}

TaskKind parse_task(const std::string& task) {
  return task == "cls" ? TaskKind::binary_classification : TaskKind::segmentation;
}

std::string file_digest(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return fmt::format("{:016x}", hash_string(std::string_view(
                                    reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

std::string format_levels(const std::vector<double>& levels) {
  std::string out;
  for (double v : levels) out += fmt::format("{}{}", out.empty() ? "" : ",", v);
  return out;
}

/// Key-value run record. Holds only inputs that influence output bytes (so
/// `--jobs` is absent), and no timestamps.
void write_run_metadata(const fs::path& dir, const std::string& subcommand,
                        const std::vector<std::pair<std::string, std::string>>& fields,
                        const std::vector<fs::path>& inputs) {
  std::string text = fmt::format("version = {}\nsubcommand = {}\n", kVersion, subcommand);
  for (const auto& [k, v] : fields) text += fmt::format("{} = {}\n", k, v);
  for (const auto& input : inputs) {
    text += fmt::format("digest[{}] = fnv1a64:{}\n", input.generic_string(), file_digest(input));
  }
  write_file_if_changed(dir / kRunMetadataFileName,
                        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_if_changed(path,
                        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<fs::path> manifest_inputs(const fs::path& manifest_path, const CorpusManifest& manifest) {
  std::vector<fs::path> inputs{manifest_path};
  for (const auto& e : manifest.entries) {
    if (fs::exists(e.image_path)) inputs.push_back(e.image_path);
  }
  return inputs;
}

// ---------------------------------------------------------------------------

struct InjectArgs {
  fs::path input;
  fs::path output;
  double s_q = 0.0;
  double s_e = 0.0;
  std::string image_id;
  std::string size;
  NoiseFlags noise;
};

int cmd_inject(const InjectArgs& a, Logger& log) {
  const NoiseSpec spec{a.s_q, a.s_e, a.noise.n0, a.noise.sigma0, a.noise.seed};
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const auto size = parse_size(a.size);
  if (spec.quantum_active()) {
    log.info("photons/pixel = {}", photon_budget(spec.s_q, spec.n0));
  } else {
    log.info("photons/pixel = n/a (quantum noise off)");
  }
  log.info("sigma_e = {}", sigma_e(spec.s_e, spec.sigma0));

  NormalizedImage img = normalize(read_image(a.input));
  if (size) img = resample(img, *size);
  const auto realization = inject(img, spec, a.image_id);
  const auto bytes = encode_image(quantize(realization.corrupted), format_for_path(a.output));
  write_file_if_changed(a.output, bytes);
  log.info("wrote {}", a.output.string());
  return kExitOk;
}

struct SweepArgs {
  fs::path manifest;
  fs::path out;
  std::string task = "seg";
  std::string size;
  std::size_t jobs = 1;
  NoiseFlags noise;
  LadderFlags ladder;
};

int cmd_sweep(const SweepArgs& a, Logger& log) {
  const auto ladder = a.ladder.ladder();
  std::vector<LadderPoint> points;
  try {
    points = ladder.points();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const auto size = parse_size(a.size);
  const auto manifest = read_manifest(a.manifest, parse_task(a.task));
  const NoiseSpec base{0.0, 0.0, a.noise.n0, a.noise.sigma0, a.noise.seed};

  log.info("sweep: {} ladder points x {} images, jobs = {}", points.size(),
           manifest.entries.size(), a.jobs);
  const auto result =
      generate_corrupted_corpus(manifest, ladder, base, a.out, GenerationOptions{size, a.jobs});
  for (const auto& f : result.failures) log.warn("{}: {}", f.image_id, f.message);
  log.info("{} files rewritten, {} unchanged, {} failed images", result.files_written,
           result.files_unchanged, result.failures.size());

  write_run_metadata(a.out, "sweep",
                     {{"manifest", a.manifest.generic_string()},
                      {"task", a.task},
                      {"seed", std::to_string(a.noise.seed)},
                      {"n0", fmt::format("{}", a.noise.n0)},
                      {"sigma0", fmt::format("{}", a.noise.sigma0)},
                      {"sq_levels", format_levels(a.ladder.sq_levels)},
                      {"se_levels", format_levels(a.ladder.se_levels)},
                      {"grid", a.ladder.grid},
                      {"joint", a.ladder.no_joint ? "off" : "on"},
                      {"size", a.size.empty() ? "native" : a.size},
                      {"points", std::to_string(points.size())}},
                     manifest_inputs(a.manifest, manifest));
  return result.failures.empty() ? kExitOk : kExitIo;
}

struct ReferenceArgs {
  fs::path sweep_dir;
  fs::path out;
  std::size_t jobs = 1;
};

int cmd_reference_segment(const ReferenceArgs& a, Logger& log) {
  const auto index_path = a.sweep_dir / kSweepIndexFileName;
  const auto bytes = read_file_bytes(index_path);
  std::istringstream lines(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::getline(lines, line);  // header
  std::vector<std::string> rel_paths;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    rel_paths.push_back(line.substr(comma + 1));
  }

  std::vector<std::string> errors(rel_paths.size());
  std::vector<char> degenerate(rel_paths.size(), 0);
  detail::parallel_for(rel_paths.size(), a.jobs, [&](std::size_t i) {
    try {
      const auto img = normalize(read_image(a.sweep_dir / rel_paths[i]));
      const auto seg = reference_segmenter(img);
      degenerate[i] = seg.degenerate ? 1 : 0;
      write_image(a.out / rel_paths[i], seg.mask.to_image());
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failed = 0;
  for (std::size_t i = 0; i < rel_paths.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      log.warn("{}: {}", rel_paths[i], errors[i]);
    } else if (degenerate[i] != 0) {
      log.warn("{}: constant image, empty reference mask", rel_paths[i]);
    }
  }
  log.info("reference masks for {} images ({} failed) under {}", rel_paths.size() - failed, failed,
           a.out.string());
  return failed == 0 ? kExitOk : kExitIo;
}

struct EvalArgs {
  fs::path manifest;
  fs::path predictions;
  fs::path out;
  fs::path split_file;
  std::string task = "seg";
  std::string task_id;
  std::string size;
  std::vector<std::string> tags;
  double threshold = 0.5;
  bool select_threshold = false;
  LadderFlags ladder;
};

int cmd_eval(const EvalArgs& a, Logger& log) {
  const auto ladder = a.ladder.ladder();
  try {
    ladder.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  if (a.select_threshold && (a.task != "cls" || a.split_file.empty())) {
    throw UsageError("--select-threshold needs --task cls and --split-file");
  }
  const auto resample = parse_size(a.size);
  const auto manifest = read_manifest(a.manifest, parse_task(a.task));
  EvalOptions options;
  options.task_id = a.task_id.empty() ? a.manifest.stem().string() : a.task_id;
  options.threshold = a.threshold;
  options.resample = resample;
  options.extra_flags = a.tags;
  std::vector<fs::path> inputs{a.manifest};
  if (!a.split_file.empty()) {
    const auto bytes = read_file_bytes(a.split_file);
    options.split = parse_split(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                                a.split_file.string());
    inputs.push_back(a.split_file);
  }

  if (a.select_threshold) {
    const auto val_ids = entries_in_split(manifest, options.split, Split::val);
    const auto truth = load_ground_truth(manifest, val_ids);
    const auto load = load_predictions(manifest, a.predictions / point_dir_name({0.0, 0.0}), val_ids, truth);
    std::vector<ScoredSample> samples;
    for (const auto& [id, s] : load.scores) samples.push_back(s);
    const auto choice = best_f1_threshold(samples);
    options.threshold = choice.threshold;
    options.extra_flags.push_back(fmt::format("f1-threshold={:.6f}", choice.threshold));
    log.info("validation-selected threshold {:.6f} (val F1 {:.6f})", choice.threshold, choice.f1);
  }

  const auto result = evaluate_sweep(manifest, ladder, a.predictions, options);
  for (const auto& w : result.warnings) log.warn("{}", w);
  const auto curves = build_curves(result.records);

  fs::create_directories(a.out);
  write_text(a.out / "records.csv", format_records(result.records));
  write_text(a.out / fmt::format("curves_{}.json", options.task_id),
             format_curves_json(options.task_id, curves));
  write_text(a.out / fmt::format("summary_{}.txt", options.task_id),
             format_summary_table(options.task_id, result.records));
  write_run_metadata(a.out, "eval",
                     {{"manifest", a.manifest.generic_string()},
                      {"predictions", a.predictions.generic_string()},
                      {"task", a.task},
                      {"task_id", options.task_id},
                      {"threshold", fmt::format("{}", options.threshold)},
                      {"sq_levels", format_levels(a.ladder.sq_levels)},
                      {"se_levels", format_levels(a.ladder.se_levels)},
                      {"grid", a.ladder.grid},
                      {"joint", a.ladder.no_joint ? "off" : "on"}},
                     inputs);
  log.info("{} records for task '{}' written to {}", result.records.size(), options.task_id,
           a.out.string());
  return kExitOk;
}

struct ValidateArgs {
  std::size_t samples = 1'000'000;
  double intensity = 0.5;
  std::vector<double> quantum_levels{1, 2, 4};
  std::vector<double> electronic_levels{2, 4};
  bool faulty_sampler = false;
  NoiseFlags noise;
};

int cmd_validate_noise(const ValidateArgs& a, std::ostream& out, Logger& log) {
  if (a.samples < kMinValidationSamples) {
    throw UsageError(fmt::format("--samples must be at least {}", kMinValidationSamples));
  }
  if (!(a.intensity > 0.0 && a.intensity <= 1.0)) throw UsageError("--intensity must lie in (0, 1]");
  NoiseValidationConfig config;
  config.intensity = a.intensity;
  config.samples = a.samples;
  config.n0 = a.noise.n0;
  config.sigma0 = a.noise.sigma0;
  config.seed = a.noise.seed;
  config.quantum_levels = a.quantum_levels;
  config.electronic_levels = a.electronic_levels;
  if (a.faulty_sampler) config.sampler = faulty_poisson_sampler;
  std::vector<StatCheck> checks;
  try {
    checks = run_noise_validation(config);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  std::size_t failed = 0;
  for (const auto& c : checks) {
    failed += c.passed ? 0 : 1;
    out << fmt::format("{} {}: measured {:.6g}, expected {:.6g}, tolerance {:.3g}\n",
                       c.passed ? "PASS" : "FAIL", c.name, c.measured, c.expected, c.tolerance);
  }
  log.info("{} of {} noise checks passed", checks.size() - failed, checks.size());
  return failed == 0 ? kExitOk : kExitValidation;
}

struct SplitArgs {
  fs::path manifest;
  fs::path out;
  std::string task = "seg";
  std::vector<double> fractions{0.70, 0.15, 0.15};
  std::uint64_t seed = 0;
  bool stratify = false;
};

int cmd_split(const SplitArgs& a, Logger& log) {
  if (a.fractions.size() != 3) throw UsageError("--fractions takes train,val,test");
  const SplitFractions fractions{a.fractions[0], a.fractions[1], a.fractions[2]};
  try {
    fractions.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const auto manifest = read_manifest(a.manifest, parse_task(a.task));
  SplitAssignment assignment;
  try {
    assignment = split_corpus(manifest, fractions, a.seed, a.stratify);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  std::array<std::size_t, 3> counts{};
  for (const auto& [patient, split] : assignment) ++counts[static_cast<std::size_t>(split)];
  write_text(a.out, format_split(assignment));
  log.info("split {} patients: train {}, val {}, test {}", assignment.size(), counts[0], counts[1],
           counts[2]);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrated quantum/electronic noise injection and robustness evaluation",
               "noiseforge"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  InjectArgs inject_args;
  auto* inject_cmd = app.add_subcommand("inject", "Corrupt one image");
  inject_cmd->add_option("input", inject_args.input, "8-bit grayscale PNG or PGM")->required();
  inject_cmd->add_option("--out", inject_args.output, "Output image (.png or .pgm)")->required();
  inject_cmd->add_option("--sq", inject_args.s_q, "Quantum severity (0 = off, else >= 1)");
  inject_cmd->add_option("--se", inject_args.s_e, "Electronic severity (0 = off)");
  inject_cmd->add_option("--image-id", inject_args.image_id, "Identifier mixed into the noise streams");
  inject_cmd->add_option("--size", inject_args.size, "Resample to N or HxW before injection");
  add_noise_flags(inject_cmd, inject_args.noise);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Generate a corrupted corpus for every ladder point");
  sweep_cmd->add_option("--manifest", sweep_args.manifest, "Corpus manifest")->required();
  sweep_cmd->add_option("--out", sweep_args.out, "Output directory")->required();
  sweep_cmd->add_option("--task", sweep_args.task, "Manifest task kind")
      ->check(CLI::IsMember({"seg", "cls"}));
  sweep_cmd->add_option("--size", sweep_args.size, "Resample to N or HxW before injection");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Worker threads (outputs do not depend on it)")
      ->check(CLI::PositiveNumber);
  add_noise_flags(sweep_cmd, sweep_args.noise);
  add_ladder_flags(sweep_cmd, sweep_args.ladder);

  ReferenceArgs ref_args;
  auto* ref_cmd = app.add_subcommand(
      "reference-segment", "Write reference-predictor masks for every image of a sweep");
  ref_cmd->add_option("--sweep", ref_args.sweep_dir, "Directory written by `sweep`")->required();
  ref_cmd->add_option("--out", ref_args.out, "Predictions root")->required();
  ref_cmd->add_option("--jobs", ref_args.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions at every ladder point");
  eval_cmd->add_option("--manifest", eval_args.manifest, "Corpus manifest")->required();
  eval_cmd->add_option("--predictions", eval_args.predictions,
                       "Root holding sq<q>_se<e>/ prediction directories")
      ->required();
  eval_cmd->add_option("--out", eval_args.out, "Report directory")->required();
  eval_cmd->add_option("--task", eval_args.task, "seg (dice, iou) or cls (auroc, auprc, f1)")
      ->check(CLI::IsMember({"seg", "cls"}));
  eval_cmd->add_option("--task-id", eval_args.task_id, "Task name in records (default: manifest stem)");
  eval_cmd->add_option("--split-file", eval_args.split_file,
                       "patient_id,split file; without it every entry is scored");
  eval_cmd->add_option("--threshold", eval_args.threshold, "F1 decision threshold");
  eval_cmd->add_flag("--select-threshold", eval_args.select_threshold,
                     "Pick the F1-maximizing threshold on the validation split at baseline");
  eval_cmd->add_option("--size", eval_args.size, "Nearest-resample ground-truth masks to N or HxW");
  eval_cmd->add_option("--tag", eval_args.tags, "Extra flag attached to every record");
  add_ladder_flags(eval_cmd, eval_args.ladder);

  ValidateArgs val_args;
  auto* val_cmd = app.add_subcommand("validate-noise",
                                     "Monte Carlo check of the noise engine against its closed forms");
  val_cmd->add_option("--samples", val_args.samples, "Pixels per Monte Carlo field");
  val_cmd->add_option("--intensity", val_args.intensity, "Constant field intensity");
  val_cmd->add_option("--sq-levels", val_args.quantum_levels,
                      "Quantum levels; the first is the SNR reference")
      ->delimiter(',');
  val_cmd->add_option("--se-levels", val_args.electronic_levels,
                      "Electronic levels; the first is the SNR reference")
      ->delimiter(',');
  val_cmd->add_flag("--faulty-sampler", val_args.faulty_sampler,
                    "Swap in a zero-variance Poisson sampler (negative control)")
      ->group("");
  add_noise_flags(val_cmd, val_args.noise);

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "Patient-level train/val/test split");
  split_cmd->add_option("--manifest", split_args.manifest, "Corpus manifest")->required();
  split_cmd->add_option("--out", split_args.out, "Split file to write")->required();
  split_cmd->add_option("--task", split_args.task, "Manifest task kind")
      ->check(CLI::IsMember({"seg", "cls"}));
  split_cmd->add_option("--fractions", split_args.fractions, "train,val,test fractions")
      ->delimiter(',');
  split_cmd->add_option("--seed", split_args.seed, "Shuffle seed");
  split_cmd->add_flag("--stratify", split_args.stratify, "Preserve the positive-label prevalence");

  std::vector<std::string> argv_storage{"noiseforge"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  Logger log(err, quiet);
  try {
    if (*inject_cmd) return cmd_inject(inject_args, log);
    if (*sweep_cmd) return cmd_sweep(sweep_args, log);
    if (*ref_cmd) return cmd_reference_segment(ref_args, log);
    if (*eval_cmd) return cmd_eval(eval_args, log);
    if (*val_cmd) return cmd_validate_noise(val_args, out, log);
    if (*split_cmd) return cmd_split(split_args, log);
  } catch (const UsageError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const InfeasibleSplitError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace noiseforge
