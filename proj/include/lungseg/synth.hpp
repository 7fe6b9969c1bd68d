#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lungseg/landmarks.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/raster.hpp"

namespace lungseg {

struct RegionScore {
  int extent = 0;   // 0-4: opacified fraction of the region is extent/4
  int density = 0;  // 0-3: opacity adds density x (body - lung) / 3
};

/// Parameters of a two-ellipse chest phantom.
struct PhantomSpec {
  std::string image_id = "phantom";
  int width = 256;
  int height = 256;
  double spacing_mm = kDefaultSpacingMm;
  double baseline_lung = 400.0;
  double baseline_body = 1600.0;
  std::array<RegionScore, 4> scores{};  // indexed by region_index()
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double hilum_confidence = 0.94;
  double carina_confidence = 0.98;
  double carina_offset_mm = 20.0;
};

struct PhantomTruth {
  GrayImage image;
  BinaryMask lung_mask;
  BinaryMask right_lung;
  BinaryMask left_lung;
  RegionMask region_mask;
  std::vector<Detection> detections;  // carina then left_hilum, with the phantom's confidences
  Point carina_point;
  Point hilum_point;  // carina_point + carina offset rows; the upper/lower split row
  std::array<std::size_t, 4> opacity_px{};  // opacified pixels per region
  std::vector<RaleRecord> rale;
};

inline constexpr int kCarinaBoxSize = 100;
inline constexpr int kHilumBoxSize = 24;

/// Deterministic in (spec). Throws DataError for an invalid spec or a region too
/// small for its requested extent.
[[nodiscard]] PhantomTruth generate_phantom(const PhantomSpec& spec);

/// Independent corrupted copies of `truth`: each boundary pixel flips with
/// probability rate, other pixels with probability rate * kSpeckleFraction.
/// rates[k] applies to candidate k. Rate 0 yields an exact copy.
[[nodiscard]] std::vector<BinaryMask> generate_candidate_masks(const BinaryMask& truth,
                                                               std::span<const double> rates,
                                                               std::uint64_t seed);
[[nodiscard]] std::vector<BinaryMask> generate_candidate_masks(const BinaryMask& truth,
                                                               std::size_t n, double rate,
                                                               std::uint64_t seed);

inline constexpr double kSpeckleFraction = 0.002;

/// `count` phantoms along a severity path s = 0..count-1 with
/// extent = round(4s/(count-1)) and density = round(3s/(count-1)); each region
/// is phase-shifted by count/4 so the four regions of one image differ.
[[nodiscard]] std::vector<PhantomSpec> severity_sweep(const PhantomSpec& base, std::size_t count);

/// Phantoms plus per-model corruption rates, as read from a synth spec file.
struct SynthConfig {
  std::vector<PhantomSpec> phantoms;
  std::vector<double> corruption_rates{0.0, 0.0, 0.0, 0.0, 0.0};
};

/// JSON spec: {"defaults": {...PhantomSpec fields, "scores": {"RUR": [extent, density], ...}},
///             "phantoms": [{overrides}], "severity_sweep": N,
///             "candidates": {"count": n, "corruption": rate | [rate per model]}}
[[nodiscard]] SynthConfig parse_synth_config(std::string_view json_text,
                                             std::optional<std::uint64_t> seed_override = {});
[[nodiscard]] SynthConfig read_synth_config(const std::filesystem::path& path,
                                            std::optional<std::uint64_t> seed_override = {});

}  // namespace lungseg
