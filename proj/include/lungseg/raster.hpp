#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace lungseg {

/// Pixel position: x is the column, y is the row (rows grow downward).
struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box in pixel coordinates. Valid when x_min < x_max and y_min < y_max.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  [[nodiscard]] bool valid() const { return x_min < x_max && y_min < y_max; }
  [[nodiscard]] double area() const { return (x_max - x_min) * (y_max - y_min); }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Four-region partition codes, fixed in every output file.
enum class Region : std::uint8_t { Background = 0, RUR = 1, RLR = 2, LUR = 3, LLR = 4 };

inline constexpr std::array<Region, 4> kLungRegions = {Region::RUR, Region::RLR, Region::LUR,
                                                       Region::LLR};

[[nodiscard]] std::string_view region_name(Region r);
/// Parses "RUR" / "RLR" / "LUR" / "LLR"; throws DataError otherwise.
[[nodiscard]] Region parse_region(std::string_view name);
/// Index of a lung region in kLungRegions (RUR=0 ... LLR=3).
[[nodiscard]] inline std::size_t region_index(Region r) {
  return static_cast<std::size_t>(r) - 1;
}

/// Grayscale radiograph. Intensities are kept in stored units (no rescaling).
class GrayImage {
 public:
  GrayImage(int width, int height, std::vector<double> pixels, double spacing_mm);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] double spacing_mm() const { return spacing_mm_; }
  [[nodiscard]] std::size_t size() const { return pixels_.size(); }
  [[nodiscard]] std::span<const double> pixels() const { return pixels_; }
  [[nodiscard]] double at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<double> pixels_;
  double spacing_mm_;
};

/// Row-major boolean raster. Bits are stored one per byte (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);  // all false
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return bits_.size(); }
  [[nodiscard]] std::span<const std::uint8_t> bits() const { return bits_; }
  [[nodiscard]] bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  [[nodiscard]] bool operator[](std::size_t i) const { return bits_[i] != 0; }
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool same_shape(const BinaryMask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Labeled raster over {0=background, 1=RUR, 2=RLR, 3=LUR, 4=LLR}.
class RegionMask {
 public:
  RegionMask(int width, int height);  // all background
  RegionMask(int width, int height, std::vector<std::uint8_t> labels);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] std::span<const std::uint8_t> labels() const { return labels_; }
  [[nodiscard]] Region at(int x, int y) const {
    return static_cast<Region>(labels_[static_cast<std::size_t>(y) * width_ + x]);
  }
  [[nodiscard]] Region operator[](std::size_t i) const { return static_cast<Region>(labels_[i]); }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> labels_;
};

inline constexpr double kDefaultSpacingMm = 0.2;

enum class SpacingSource { Explicit, Sidecar, Default };

struct SpacingResolution {
  double spacing_mm = kDefaultSpacingMm;
  SpacingSource source = SpacingSource::Default;
};

[[nodiscard]] std::string_view spacing_source_name(SpacingSource s);

/// Path of the optional sidecar for an image: "<image>.meta".
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& image);
/// Reads `spacing_mm=<real>` from the sidecar, if the sidecar exists.
[[nodiscard]] std::optional<double> read_spacing_sidecar(const std::filesystem::path& image);
void write_spacing_sidecar(const std::filesystem::path& image, double spacing_mm);

/// Explicit value wins, then the sidecar, then kDefaultSpacingMm.
[[nodiscard]] SpacingResolution resolve_spacing(const std::filesystem::path& image,
                                                std::optional<double> explicit_mm);

// File I/O. Supported formats: binary PGM (.pgm/.pnm) and grayscale PNG, 8 or 16 bit.
[[nodiscard]] GrayImage load_image(const std::filesystem::path& path, double spacing_mm);
/// Writes 8-bit when every value fits in [0,255], otherwise 16-bit. Values must be integral.
void save_image(const GrayImage& image, const std::filesystem::path& path);

/// Any pixel > 0 is true.
[[nodiscard]] BinaryMask load_mask(const std::filesystem::path& path);
/// Writes {0,255}.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Writes raw label codes 0-4 as 8-bit.
void save_region_mask(const RegionMask& mask, const std::filesystem::path& path);
[[nodiscard]] RegionMask load_region_mask(const std::filesystem::path& path);

}  // namespace lungseg
