#include "lungseg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "lungseg/error.hpp"
#include "lungseg/textio.hpp"

namespace lungseg {

namespace {

void check_dims(int width, int height, std::size_t n, const char* what) {
  if (width < 1 || height < 1) {
    throw DataError(std::string(what) + ": dimensions must be positive");
  }
  if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError(std::string(what) + ": pixel count does not match width x height");
  }
}

bool supported_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".pnm";
}

// Decodes a single-channel 8/16-bit raster, rejecting color and other depths.
cv::Mat read_gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("cannot read " + path.string() + ": no such file");
  }
  if (!supported_extension(path)) {
    throw IoError("unsupported image format: " + path.string());
  }
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) {
    throw IoError("cannot decode " + path.string());
  }
  if (m.channels() != 1) {
    throw DataError("color image not supported: " + path.string());
  }
  if (m.depth() != CV_8U && m.depth() != CV_16U) {
    throw DataError("unsupported bit depth in " + path.string());
  }
  if (m.cols < 1 || m.rows < 1) {
    throw DataError("zero-sized image: " + path.string());
  }
  return m;
}

void write_gray(const cv::Mat& m, const std::filesystem::path& path) {
  if (!supported_extension(path)) {
    throw IoError("unsupported image format: " + path.string());
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) {
    throw IoError("cannot write " + path.string());
  }
}

template <typename Fn>
void for_each_pixel(const cv::Mat& m, Fn&& fn) {
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const double v = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
      fn(v);
    }
  }
}

cv::Mat to_mat8(int width, int height, std::span<const std::uint8_t> values) {
  cv::Mat m(height, width, CV_8UC1);
  std::copy(values.begin(), values.end(), m.ptr<std::uint8_t>(0));
  return m;
}

}  // namespace

std::string_view region_name(Region r) {
  switch (r) {
    case Region::Background: return "background";
    case Region::RUR: return "RUR";
    case Region::RLR: return "RLR";
    case Region::LUR: return "LUR";
    case Region::LLR: return "LLR";
  }
  return "?";
}

Region parse_region(std::string_view name) {
  for (Region r : kLungRegions) {
    if (region_name(r) == name) return r;
  }
  throw DataError("unknown region '" + std::string(name) + "'");
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels, double spacing_mm)
    : width_(width), height_(height), pixels_(std::move(pixels)), spacing_mm_(spacing_mm) {
  check_dims(width, height, pixels_.size(), "GrayImage");
  if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm)) {
    throw DataError("GrayImage: spacing_mm must be positive");
  }
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DataError("GrayImage: intensities must be finite and non-negative");
    }
  }
}

BinaryMask::BinaryMask(int width, int height)
    : BinaryMask(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)))) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, bits_.size(), "BinaryMask");
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RegionMask::RegionMask(int width, int height)
    : RegionMask(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)))) {}

RegionMask::RegionMask(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  check_dims(width, height, labels_.size(), "RegionMask");
  if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t l) { return l > 4; })) {
    throw DataError("RegionMask: label outside {0..4}");
  }
}

std::string_view spacing_source_name(SpacingSource s) {
  switch (s) {
    case SpacingSource::Explicit: return "explicit";
    case SpacingSource::Sidecar: return "sidecar";
    case SpacingSource::Default: return "default";
  }
  return "?";
}

std::filesystem::path sidecar_path(const std::filesystem::path& image) {
  return std::filesystem::path(image.string() + ".meta");
}

std::optional<double> read_spacing_sidecar(const std::filesystem::path& image) {
  const auto meta = sidecar_path(image);
  std::ifstream in(meta);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    const auto text = trim(line);
    constexpr std::string_view key = "spacing_mm=";
    if (text.starts_with(key)) {
      const double v = parse_real(text.substr(key.size()), "spacing_mm in " + meta.string());
      if (!(v > 0.0)) throw DataError("non-positive spacing_mm in " + meta.string());
      return v;
    }
  }
  return std::nullopt;
}

void write_spacing_sidecar(const std::filesystem::path& image, double spacing_mm) {
  const auto meta = sidecar_path(image);
  std::ofstream out(meta, std::ios::binary);
  if (!out) throw IoError("cannot write " + meta.string());
  out << "spacing_mm=" << format_real(spacing_mm) << "\n";
}

SpacingResolution resolve_spacing(const std::filesystem::path& image,
                                  std::optional<double> explicit_mm) {
  if (explicit_mm) {
    if (!(*explicit_mm > 0.0)) throw DataError("spacing_mm must be positive");
    return {*explicit_mm, SpacingSource::Explicit};
  }
  if (auto side = read_spacing_sidecar(image)) return {*side, SpacingSource::Sidecar};
  return {kDefaultSpacingMm, SpacingSource::Default};
}

GrayImage load_image(const std::filesystem::path& path, double spacing_mm) {
  if (!(spacing_mm > 0.0)) throw DataError("spacing_mm must be positive");
  const cv::Mat m = read_gray(path);
  std::vector<double> pixels;
  pixels.reserve(m.total());
  for_each_pixel(m, [&](double v) { pixels.push_back(v); });
  return GrayImage(m.cols, m.rows, std::move(pixels), spacing_mm);
}

void save_image(const GrayImage& image, const std::filesystem::path& path) {
  const auto px = image.pixels();
  double max_v = 0.0;
  for (double v : px) {
    if (v != std::floor(v) || v > 65535.0) {
      throw DataError("save_image: intensities must be integers in [0,65535]");
    }
    max_v = std::max(max_v, v);
  }
  if (max_v <= 255.0) {
    std::vector<std::uint8_t> bytes(px.size());
    std::transform(px.begin(), px.end(), bytes.begin(),
                   [](double v) { return static_cast<std::uint8_t>(v); });
    write_gray(to_mat8(image.width(), image.height(), bytes), path);
    return;
  }
  cv::Mat m(image.height(), image.width(), CV_16UC1);
  std::transform(px.begin(), px.end(), m.ptr<std::uint16_t>(0),
                 [](double v) { return static_cast<std::uint16_t>(v); });
  write_gray(m, path);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const cv::Mat m = read_gray(path);
  std::vector<std::uint8_t> bits;
  bits.reserve(m.total());
  for_each_pixel(m, [&](double v) { bits.push_back(v > 0 ? 1 : 0); });
  return BinaryMask(m.cols, m.rows, std::move(bits));
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.size());
  const auto bits = mask.bits();
  std::transform(bits.begin(), bits.end(), bytes.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  write_gray(to_mat8(mask.width(), mask.height(), bytes), path);
}

void save_region_mask(const RegionMask& mask, const std::filesystem::path& path) {
  write_gray(to_mat8(mask.width(), mask.height(), mask.labels()), path);
}

RegionMask load_region_mask(const std::filesystem::path& path) {
  const cv::Mat m = read_gray(path);
  if (m.depth() != CV_8U) throw DataError("region mask must be 8-bit: " + path.string());
  std::vector<std::uint8_t> labels(m.ptr<std::uint8_t>(0), m.ptr<std::uint8_t>(0) + m.total());
  return RegionMask(m.cols, m.rows, std::move(labels));
}

}  // namespace lungseg
