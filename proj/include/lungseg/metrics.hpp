#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lungseg/landmarks.hpp"
#include "lungseg/quantify.hpp"
#include "lungseg/raster.hpp"

namespace lungseg {

inline constexpr double kSignificanceLevel = 0.05;

// --- segmentation ---------------------------------------------------------

/// 2|a∩b| / (|a|+|b|); 1.0 when both masks are empty.
[[nodiscard]] double dice(const BinaryMask& a, const BinaryMask& b);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1); 0 for a single value
};
[[nodiscard]] MeanStd mean_std(std::span<const double> values);

// --- detection ------------------------------------------------------------

/// Intersection over union; 0 for disjoint boxes.
[[nodiscard]] double box_iou(const Box& a, const Box& b);

struct GroundTruthBox {
  std::string image_id;
  Landmark landmark = Landmark::Carina;
  Box box;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Precision/recall after each prediction of class `cls`, visited in descending
/// confidence (stable in input order). Each prediction is matched to the unmatched
/// same-image ground truth with the highest IoU >= iou_threshold.
[[nodiscard]] std::vector<PrPoint> precision_recall_curve(
    std::span<const TaggedDetection> predictions, std::span<const GroundTruthBox> ground_truth,
    Landmark cls, double iou_threshold);

/// Area under the all-point interpolated precision envelope.
[[nodiscard]] double all_point_average_precision(std::span<const PrPoint> curve);

/// AP of one class; nullopt when the class has no ground truth.
[[nodiscard]] std::optional<double> class_average_precision(
    std::span<const TaggedDetection> predictions, std::span<const GroundTruthBox> ground_truth,
    Landmark cls, double iou_threshold = 0.5);

struct DetectionEvaluation {
  double iou_threshold = 0.5;
  std::map<Landmark, std::optional<double>> per_class;
  double mean_ap = 0.0;  // unweighted mean over classes with ground truth
  std::vector<std::string> warnings;
};

/// Throws DataError when no class has ground truth or the threshold is outside (0,1].
[[nodiscard]] DetectionEvaluation mean_average_precision(
    std::span<const TaggedDetection> predictions, std::span<const GroundTruthBox> ground_truth,
    double iou_threshold = 0.5);

[[nodiscard]] std::vector<GroundTruthBox> to_ground_truth(std::span<const TaggedDetection> boxes);

// --- statistics -----------------------------------------------------------

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
[[nodiscard]] double student_t_two_sided_p(double t, double df);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Throws DataError for n < 3, unequal lengths, or a constant sequence.
[[nodiscard]] PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct PairedTTest {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
  bool degenerate = false;  // nonzero differences with zero variance; p reported as 0
  [[nodiscard]] bool significant() const { return p_value < kSignificanceLevel; }
};

/// Two-sided paired t-test on d = a - b.
[[nodiscard]] PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

// --- RALE correlation -----------------------------------------------------

enum class ScoreKind { Extent, Density };
inline constexpr std::array<ScoreKind, 2> kScoreKinds = {ScoreKind::Extent, ScoreKind::Density};
[[nodiscard]] std::string_view score_kind_name(ScoreKind k);

struct RaleRecord {
  std::string image_id;
  Region region = Region::RUR;
  int extent = 0;   // 0-4
  int density = 0;  // 0-3
  [[nodiscard]] int score(ScoreKind k) const { return k == ScoreKind::Extent ? extent : density; }
};

/// Validates region and score ranges; throws DataError.
[[nodiscard]] RaleRecord make_rale_record(std::string image_id, Region region, int extent,
                                          int density);

// CSV: image_id,region,extent,density
inline constexpr const char* kRaleCsvHeader = "image_id,region,extent,density";
[[nodiscard]] std::vector<RaleRecord> read_rale_csv(const std::filesystem::path& path);
void write_rale_csv(std::span<const RaleRecord> records, const std::filesystem::path& path);

/// Total RALE score of each image: sum over regions of extent x density.
[[nodiscard]] std::map<std::string, int> rale_totals(std::span<const RaleRecord> records);

struct JoinedSample {
  std::string image_id;
  Region region = Region::RUR;
  double intensity = 0.0;
  RaleRecord score;
};

/// Inner join on (image_id, region), in stats order. Regions without a mean are skipped.
/// With `filter_positive_total`, images whose RALE total is 0 are dropped first.
[[nodiscard]] std::vector<JoinedSample> join_stats_rale(std::span<const RegionStats> stats,
                                                        std::span<const RaleRecord> scores,
                                                        bool filter_positive_total);

struct CorrelationResult {
  Region region = Region::RUR;
  ScoreKind score_kind = ScoreKind::Extent;
  std::optional<double> r;
  std::optional<double> p_value;
  std::size_t n = 0;
  std::string error;  // set when r is undefined
};

/// One result per region x score kind (8 total, RUR..LLR, extent before density).
/// Cells with fewer than 3 samples or constant input carry an error instead of r.
[[nodiscard]] std::vector<CorrelationResult> correlate_rale(std::span<const RegionStats> stats,
                                                            std::span<const RaleRecord> scores,
                                                            bool filter_positive_total);

struct BoxplotBin {
  Region region = Region::RUR;
  ScoreKind score_kind = ScoreKind::Extent;
  int score = 0;
  std::size_t n = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Five-number summaries of intensity per region, score kind and score value
/// (linear-interpolated quartiles). Empty bins are omitted.
[[nodiscard]] std::vector<BoxplotBin> boxplot_bins(std::span<const JoinedSample> samples);

}  // namespace lungseg
