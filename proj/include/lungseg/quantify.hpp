#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lungseg/raster.hpp"

namespace lungseg {

struct RegionStat {
  std::size_t area_px = 0;
  std::optional<double> mean_normalized_intensity;  // absent when area_px == 0
  friend bool operator==(const RegionStat&, const RegionStat&) = default;
};

struct RegionStats {
  std::string image_id;
  double background_mean = 0.0;
  std::array<RegionStat, 4> regions{};  // indexed by region_index()

  [[nodiscard]] const RegionStat& operator[](Region r) const { return regions[region_index(r)]; }
  friend bool operator==(const RegionStats&, const RegionStats&) = default;
};

struct QuantifyOptions {
  // Pixels within this many pixels of the raster edge are left out of the
  // background mean (collimation margins).
  int crop_border = 0;
};

/// Background mean is taken over every non-lung pixel; each region mean is the
/// mean of (pixel - background mean) over that region.
/// Throws DataError on mismatched dimensions, region labels outside the lung,
/// or an empty background.
[[nodiscard]] RegionStats normalize_and_quantify(std::string image_id, const GrayImage& image,
                                                 const BinaryMask& lung, const RegionMask& regions,
                                                 const QuantifyOptions& opts = {});

// CSV: image_id,region,area_px,mean_normalized_intensity,background_mean
// Four rows per image; an absent mean is an empty field.
inline constexpr const char* kStatsCsvHeader =
    "image_id,region,area_px,mean_normalized_intensity,background_mean";

void write_stats_csv(std::ostream& out, std::span<const RegionStats> stats);
/// Rows only, no header.
void write_stats_rows(std::ostream& out, const RegionStats& stats);
[[nodiscard]] std::vector<RegionStats> read_stats_csv(const std::filesystem::path& path);

}  // namespace lungseg
