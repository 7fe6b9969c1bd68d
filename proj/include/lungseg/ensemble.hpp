#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lungseg/raster.hpp"

namespace lungseg {

struct EnsembleConfig {
  std::size_t keep_components = 2;  // two lungs
};

/// Pixel is lung when at least half of the candidates vote lung (2*votes >= N).
/// Throws DataError on an empty input or mismatched dimensions.
[[nodiscard]] BinaryMask majority_vote(std::span<const BinaryMask> masks);

/// Sets every false pixel that is not 4-connected to the raster border.
[[nodiscard]] BinaryMask fill_holes(const BinaryMask& mask);

/// Keeps the `keep` largest 8-connected components. Equal areas are ordered by
/// the smaller raster index of their first pixel.
[[nodiscard]] BinaryMask remove_isolated(const BinaryMask& mask, std::size_t keep);

/// fill_holes followed by remove_isolated.
[[nodiscard]] BinaryMask postprocess(const BinaryMask& mask, const EnsembleConfig& cfg = {});

struct Component {
  std::size_t area = 0;
  std::size_t first_index = 0;  // raster index of the top-left-most pixel
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

struct ComponentLabels {
  std::vector<int> labels;  // -1 for background, else index into components
  std::vector<Component> components;  // in order of first_index
};

/// 8-connected labeling of true pixels.
[[nodiscard]] ComponentLabels label_components(const BinaryMask& mask);

struct LungPair {
  BinaryMask right;  // patient's right, viewer's left
  BinaryMask left;
};

/// Separates the two lungs. With two components the one with the smaller centroid
/// column is the right lung. A single component is cut at `fallback_column`
/// (columns < fallback go right). Throws DataError with 0 or more than 2 components,
/// or with 1 component and no fallback.
[[nodiscard]] LungPair split_left_right(const BinaryMask& mask,
                                        std::optional<int> fallback_column);

[[nodiscard]] BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);

}  // namespace lungseg
