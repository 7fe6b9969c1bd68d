#include "lungseg/quantify.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "lungseg/error.hpp"
#include "lungseg/textio.hpp"

namespace lungseg {

RegionStats normalize_and_quantify(std::string image_id, const GrayImage& image,
                                   const BinaryMask& lung, const RegionMask& regions,
                                   const QuantifyOptions& opts) {
  const int w = image.width();
  const int h = image.height();
  if (lung.width() != w || lung.height() != h || regions.width() != w || regions.height() != h) {
    throw DataError("normalize_and_quantify: dimensions of image, lung and regions differ");
  }
  if (opts.crop_border < 0) throw DataError("crop_border must be non-negative");

  const auto px = image.pixels();
  double bg_sum = 0.0;
  std::size_t bg_n = 0;
  std::array<double, 4> sums{};
  std::array<std::size_t, 4> counts{};
  const int b = opts.crop_border;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      const auto label = regions[i];
      if (label != Region::Background) {
        if (!lung[i]) throw DataError("normalize_and_quantify: region label outside lung mask");
        sums[region_index(label)] += px[i];
        ++counts[region_index(label)];
      }
      if (!lung[i] && x >= b && y >= b && x < w - b && y < h - b) {
        bg_sum += px[i];
        ++bg_n;
      }
    }
  }
  if (bg_n == 0) throw DataError("normalize_and_quantify: no background pixels outside the lung");

  RegionStats out;
  out.image_id = std::move(image_id);
  out.background_mean = bg_sum / static_cast<double>(bg_n);
  for (std::size_t k = 0; k < 4; ++k) {
    out.regions[k].area_px = counts[k];
    if (counts[k] > 0) {
      out.regions[k].mean_normalized_intensity =
          sums[k] / static_cast<double>(counts[k]) - out.background_mean;
    }
  }
  return out;
}

void write_stats_rows(std::ostream& out, const RegionStats& stats) {
  for (Region r : kLungRegions) {
    const auto& s = stats[r];
    out << stats.image_id << ',' << region_name(r) << ',' << s.area_px << ','
        << (s.mean_normalized_intensity ? format_real(*s.mean_normalized_intensity) : "") << ','
        << format_real(stats.background_mean) << '\n';
  }
}

void write_stats_csv(std::ostream& out, std::span<const RegionStats> stats) {
  out << kStatsCsvHeader << '\n';
  for (const auto& s : stats) write_stats_rows(out, s);
}

std::vector<RegionStats> read_stats_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kStatsCsvHeader) {
    throw DataError(path.string() + ": missing or unexpected header");
  }
  std::vector<RegionStats> out;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw DataError(where + ": expected 5 fields");
    auto [it, inserted] = index.try_emplace(f[0], out.size());
    if (inserted) {
      out.emplace_back();
      out.back().image_id = f[0];
    }
    auto& s = out[it->second];
    const auto region = parse_region(f[1]);
    const auto area = parse_int(f[2], "area_px at " + where);
    if (area < 0) throw DataError(where + ": negative area");
    auto& rs = s.regions[region_index(region)];
    rs.area_px = static_cast<std::size_t>(area);
    if (!f[3].empty()) rs.mean_normalized_intensity = parse_real(f[3], "mean at " + where);
    s.background_mean = parse_real(f[4], "background_mean at " + where);
  }
  return out;
}

}  // namespace lungseg
