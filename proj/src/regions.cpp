#include "lungseg/regions.hpp"

#include <string>

#include "lungseg/error.hpp"

namespace lungseg {

RegionMask split_four_regions(const BinaryMask& right_lung, const BinaryMask& left_lung,
                              Point ref) {
  if (!right_lung.same_shape(left_lung)) {
    throw DataError("split_four_regions: lung mask dimensions differ");
  }
  const int w = right_lung.width();
  const int h = right_lung.height();
  if (ref.y < 0 || ref.y >= h) {
    throw DataError("split_four_regions: reference row " + std::to_string(ref.y) +
                    " outside image");
  }
  std::vector<std::uint8_t> labels(right_lung.size(), 0);
  for (int y = 0; y < h; ++y) {
    const bool upper = y < ref.y;
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      const bool r = right_lung[i];
      const bool l = left_lung[i];
      if (r && l) throw DataError("split_four_regions: right and left lung masks overlap");
      if (r) {
        labels[i] = static_cast<std::uint8_t>(upper ? Region::RUR : Region::RLR);
      } else if (l) {
        labels[i] = static_cast<std::uint8_t>(upper ? Region::LUR : Region::LLR);
      }
    }
  }
  return RegionMask(w, h, std::move(labels));
}

std::array<RegionArea, 4> region_areas(const RegionMask& mask, double spacing_mm) {
  std::array<RegionArea, 4> out{};
  for (auto l : mask.labels()) {
    if (l != 0) ++out[l - 1].pixels;
  }
  for (auto& a : out) a.mm2 = static_cast<double>(a.pixels) * spacing_mm * spacing_mm;
  return out;
}

}  // namespace lungseg
