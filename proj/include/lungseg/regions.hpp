#pragma once

#include <array>
#include <cstddef>

#include "lungseg/raster.hpp"

namespace lungseg {

/// Labels right-lung pixels RUR/RLR and left-lung pixels LUR/LLR, split at ref.y.
/// The row equal to ref.y belongs to the lower regions.
/// Throws DataError on mismatched dimensions, overlapping lungs, or ref.y outside the rows.
[[nodiscard]] RegionMask split_four_regions(const BinaryMask& right_lung,
                                            const BinaryMask& left_lung, Point ref);

struct RegionArea {
  std::size_t pixels = 0;
  double mm2 = 0.0;
};

/// Indexed by region_index(): RUR, RLR, LUR, LLR.
[[nodiscard]] std::array<RegionArea, 4> region_areas(const RegionMask& mask, double spacing_mm);

}  // namespace lungseg
