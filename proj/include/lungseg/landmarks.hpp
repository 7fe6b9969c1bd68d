#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lungseg/raster.hpp"

namespace lungseg {

enum class Landmark { Carina, LeftHilum };

inline constexpr std::array<Landmark, 2> kLandmarks = {Landmark::Carina, Landmark::LeftHilum};

[[nodiscard]] std::string_view landmark_name(Landmark l);  // "carina" / "left_hilum"
[[nodiscard]] Landmark parse_landmark(std::string_view name);

struct Detection {
  Landmark landmark = Landmark::Carina;
  Box box;
  double confidence = 0.0;  // [0,1]
};

/// A detection bound to the image it was produced for (one JSONL line).
struct TaggedDetection {
  std::string image_id;
  Detection detection;
};

struct ReferenceConfig {
  double confidence_threshold = 0.9;  // hilum used only when confidence > threshold
  double carina_offset_mm = 20.0;     // reference sits this far below the carina
};

enum class ReferenceSource { Hilum, Carina };

[[nodiscard]] std::string_view reference_source_name(ReferenceSource s);

struct ReferencePoint {
  Point point;
  ReferenceSource source = ReferenceSource::Hilum;
  std::optional<double> hilum_confidence;   // best left_hilum confidence seen
  std::optional<double> carina_confidence;  // best carina confidence seen
  std::optional<Point> carina_center;
};

/// floor(v + 0.5)
[[nodiscard]] int round_half_up(double v);

/// Box center rounded half-up to integer pixels.
[[nodiscard]] Point box_center(const Box& box);

/// Vertical carina offset in pixels: round_half_up(offset_mm / spacing_mm).
[[nodiscard]] int carina_offset_px(double offset_mm, double spacing_mm);

/// Highest-confidence detection of `landmark`; ties go to smaller y_min, then x_min.
[[nodiscard]] std::optional<Detection> best_detection(std::span<const Detection> detections,
                                                      Landmark landmark);

/// Picks the row that divides upper from lower lungs.
///
/// The left hilum box center is used when its best confidence exceeds the threshold.
/// Otherwise the carina box center shifted down by carina_offset_mm is used.
/// Throws DataError when neither route is available, or when `image_height` is
/// given and the resulting row falls outside [0, image_height).
[[nodiscard]] ReferencePoint select_reference_point(std::span<const Detection> detections,
                                                    double spacing_mm,
                                                    const ReferenceConfig& cfg = {},
                                                    std::optional<int> image_height = {});

// JSONL: {"image_id": str, "landmark": "carina"|"left_hilum",
//         "box": [x_min,y_min,x_max,y_max], "confidence": float}
// Ground-truth files may omit "confidence" when `require_confidence` is false (read as 1).
[[nodiscard]] TaggedDetection parse_detection_line(std::string_view line,
                                                   bool require_confidence = true);
[[nodiscard]] std::string detection_to_json_line(const TaggedDetection& d);
[[nodiscard]] std::vector<TaggedDetection> read_detections_jsonl(const std::filesystem::path& path,
                                                                 bool require_confidence = true);
void write_detections_jsonl(std::span<const TaggedDetection> detections,
                            const std::filesystem::path& path);

/// Detections whose image_id matches.
[[nodiscard]] std::vector<Detection> detections_for(std::span<const TaggedDetection> all,
                                                    std::string_view image_id);

}  // namespace lungseg
