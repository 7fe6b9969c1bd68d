#include "lungseg/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lungseg/error.hpp"

namespace lungseg {

BinaryMask majority_vote(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw DataError("majority_vote: no masks");
  const auto& first = masks.front();
  for (const auto& m : masks) {
    if (!m.same_shape(first)) throw DataError("majority_vote: mask dimensions differ");
  }
  std::vector<std::size_t> votes(first.size(), 0);
  for (const auto& m : masks) {
    const auto bits = m.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) votes[i] += bits[i];
  }
  const std::size_t n = masks.size();
  std::vector<std::uint8_t> out(first.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2 * votes[i] >= n ? 1 : 0;
  return BinaryMask(first.width(), first.height(), std::move(out));
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  if (mask.size() == 0) return mask;
  // reached[i]: false pixel connected to the border
  std::vector<std::uint8_t> reached(mask.size(), 0);
  std::vector<std::size_t> stack;
  auto seed = [&](int x, int y) {
    const auto i = static_cast<std::size_t>(y) * w + x;
    if (!mask[i] && !reached[i]) {
      reached[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = reached[i] ? 0 : 1;
  return BinaryMask(w, h, std::move(out));
}

ComponentLabels label_components(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels result;
  result.labels.assign(mask.size(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || result.labels[start] >= 0) continue;
    const int id = static_cast<int>(result.components.size());
    Component comp;
    comp.first_index = start;
    double sum_x = 0.0;
    double sum_y = 0.0;
    result.labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      ++comp.area;
      sum_x += x;
      sum_y += y;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto j = static_cast<std::size_t>(ny) * w + nx;
          if (mask[j] && result.labels[j] < 0) {
            result.labels[j] = id;
            stack.push_back(j);
          }
        }
      }
    }
    comp.centroid_x = sum_x / static_cast<double>(comp.area);
    comp.centroid_y = sum_y / static_cast<double>(comp.area);
    result.components.push_back(comp);
  }
  return result;
}

BinaryMask remove_isolated(const BinaryMask& mask, std::size_t keep) {
  if (keep < 1) throw DataError("remove_isolated: keep must be >= 1");
  const auto cl = label_components(mask);
  if (cl.components.size() <= keep) return mask;
  std::vector<int> order(cl.components.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = cl.components[a];
    const auto& cb = cl.components[b];
    if (ca.area != cb.area) return ca.area > cb.area;
    return ca.first_index < cb.first_index;
  });
  std::vector<std::uint8_t> kept(cl.components.size(), 0);
  for (std::size_t k = 0; k < keep; ++k) kept[order[k]] = 1;
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = cl.labels[i] >= 0 && kept[cl.labels[i]] ? 1 : 0;
  }
  return BinaryMask(mask.width(), mask.height(), std::move(out));
}

BinaryMask postprocess(const BinaryMask& mask, const EnsembleConfig& cfg) {
  return remove_isolated(fill_holes(mask), cfg.keep_components);
}

LungPair split_left_right(const BinaryMask& mask, std::optional<int> fallback_column) {
  const auto cl = label_components(mask);
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> right(mask.size(), 0);
  std::vector<std::uint8_t> left(mask.size(), 0);
  switch (cl.components.size()) {
    case 0:
      throw DataError("split_left_right: mask is empty");
    case 1: {
      if (!fallback_column) {
        throw DataError("split_left_right: lungs are fused and no fallback column was given");
      }
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const int x = static_cast<int>(i % w);
        (x < *fallback_column ? right : left)[i] = 1;
      }
      break;
    }
    case 2: {
      const auto& c0 = cl.components[0];
      const auto& c1 = cl.components[1];
      // c0 precedes c1 in raster order, so it also wins an exact centroid tie.
      const int right_id = c1.centroid_x < c0.centroid_x ? 1 : 0;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (cl.labels[i] < 0) continue;
        (cl.labels[i] == right_id ? right : left)[i] = 1;
      }
      break;
    }
    default:
      throw DataError("split_left_right: expected 1 or 2 components, found " +
                      std::to_string(cl.components.size()));
  }
  return {BinaryMask(w, h, std::move(right)), BinaryMask(w, h, std::move(left))};
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw DataError("mask_union: dimensions differ");
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] || b[i];
  return BinaryMask(a.width(), a.height(), std::move(out));
}

}  // namespace lungseg
