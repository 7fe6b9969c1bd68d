#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lungseg/ensemble.hpp"
#include "lungseg/landmarks.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/quantify.hpp"
#include "lungseg/synth.hpp"

namespace lungseg {

namespace fs = std::filesystem;

// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitPartial = 3 };

struct ManifestEntry {
  std::string image_id;
  fs::path image;
  std::vector<fs::path> masks;
  fs::path detections;  // JSONL, filtered by image_id
  std::optional<double> spacing_mm;
};

struct RunManifest {
  std::vector<ManifestEntry> images;
  fs::path out_dir;
};

/// JSON manifest:
/// {"out_dir": "run", "images": [{"image_id": "...", "image": "a.png",
///   "masks": ["m1.png", ...], "detections": "det.jsonl", "spacing_mm": 0.2}]}
/// Relative paths are resolved against the manifest's directory.
[[nodiscard]] RunManifest read_manifest(const fs::path& path);
/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const RunManifest& manifest, const fs::path& path);

struct PipelineOptions {
  std::optional<double> spacing_mm;  // overrides manifest and sidecar values
  unsigned jobs = 0;                 // 0: hardware concurrency
  std::optional<fs::path> out_dir;   // overrides the manifest's out_dir
  EnsembleConfig ensemble;
  ReferenceConfig reference;
  QuantifyOptions quantify;
};

struct ImageOutcome {
  std::string image_id;
  bool ok = false;
  std::string error;
  SpacingResolution spacing;
  std::optional<ReferencePoint> reference;
  std::optional<RegionStats> stats;
  std::string log_line;  // one JSON object, no trailing newline
};

struct PipelineRun {
  std::vector<ImageOutcome> outcomes;  // manifest order
  fs::path out_dir;
  int exit_code = kExitOk;
};

// Output layout under out_dir:
//   fused/<id>.png  right/<id>.png  left/<id>.png  regions/<id>.png
//   region_stats.csv  pipeline_log.jsonl
inline constexpr const char* kStatsCsvName = "region_stats.csv";
inline constexpr const char* kPipelineLogName = "pipeline_log.jsonl";

/// Ensemble -> post-process -> reference point -> four regions -> quantify for one image.
/// Never throws for data problems; failures are reported in the outcome.
[[nodiscard]] ImageOutcome process_image(const ManifestEntry& entry, const PipelineOptions& opts,
                                         const fs::path& out_dir);

/// Runs every image on a bounded worker pool and writes the CSV and log in manifest order.
/// Exit code: 0 all images ok, 3 some failed, 2 none succeeded.
/// Throws DataError on an empty manifest and IoError when out_dir is unwritable.
[[nodiscard]] PipelineRun run_pipeline(const RunManifest& manifest, const PipelineOptions& opts,
                                       std::ostream* progress = nullptr);

// --- eval-seg -------------------------------------------------------------

struct NamedDir {
  std::string name;
  fs::path dir;
};

struct SegModelRow {
  std::string name;
  std::vector<double> dice;  // per file, in SegEvaluation::files order
  MeanStd summary;
  std::optional<PairedTTest> vs_ensemble;  // absent on the ensemble row
};

struct SegEvaluation {
  std::vector<std::string> files;
  std::vector<SegModelRow> rows;  // models in input order, ensemble last
};

/// Dice of every model against ground truth plus paired tests of ensemble vs each model.
/// Throws DataError when any directory's mask file set differs from gt_dir's.
[[nodiscard]] SegEvaluation evaluate_segmentation(std::span<const NamedDir> models,
                                                  const NamedDir& ensemble, const fs::path& gt_dir);

/// Columns: no,model,dice_mean,dice_std,p_value,summary. summary reads
/// "0.874 ± 0.057*" where * marks p < 0.05 against the ensemble.
void write_seg_table_csv(const SegEvaluation& eval, std::ostream& out);

// --- eval-det -------------------------------------------------------------

[[nodiscard]] DetectionEvaluation evaluate_detection_files(const fs::path& predictions,
                                                           const fs::path& ground_truth,
                                                           double iou_threshold);
[[nodiscard]] std::string detection_report_json(const DetectionEvaluation& ev);

// --- correlate ------------------------------------------------------------

struct CorrelateRun {
  std::vector<CorrelationResult> cells;
  std::vector<BoxplotBin> bins;
};

/// Writes correlation.json and boxplot_<REGION>.csv into out_dir.
/// Throws DataError when no cell has 3 or more samples.
[[nodiscard]] CorrelateRun run_correlate(const fs::path& stats_csv, const fs::path& rale_csv,
                                         bool filter_positive_total, const fs::path& out_dir);
[[nodiscard]] std::string correlation_report_json(std::span<const CorrelationResult> cells);

// --- synth ----------------------------------------------------------------

struct SynthRun {
  fs::path manifest;
  std::vector<std::string> image_ids;
  std::vector<PhantomTruth> truths;  // only when keep_truth
};

// Layout under out_dir:
//   images/<id>.png (+ .meta)  gt/<id>.png  gt_regions/<id>.png  model<k>/<id>.png
//   detections.jsonl  gt_detections.jsonl  rale.csv  manifest.json (out_dir "run")
[[nodiscard]] SynthRun write_synth_dataset(const SynthConfig& cfg, const fs::path& out_dir,
                                           bool keep_truth = false);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (0: hardware concurrency).
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace lungseg
