#include "lungseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lungseg/error.hpp"

namespace lungseg {

namespace {

// Uniform in [0,1) from the top 53 bits; avoids implementation-defined distributions.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0,1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return std::mt19937_64(seq);
}

void validate(const PhantomSpec& s) {
  if (s.width < 16 || s.height < 16) throw DataError("phantom must be at least 16x16");
  if (!(s.spacing_mm > 0.0)) throw DataError("phantom spacing_mm must be positive");
  if (!(s.baseline_lung >= 0.0)) throw DataError("baseline_lung must be non-negative");
  if (!(s.baseline_body > s.baseline_lung)) {
    throw DataError("baseline_body must exceed baseline_lung");
  }
  if (s.baseline_body > 65535.0) throw DataError("baseline_body exceeds 16-bit range");
  if (!(s.noise_sigma >= 0.0)) throw DataError("noise_sigma must be non-negative");
  for (const auto& sc : s.scores) {
    if (sc.extent < 0 || sc.extent > 4) throw DataError("extent outside 0-4");
    if (sc.density < 0 || sc.density > 3) throw DataError("density outside 0-3");
  }
  for (double c : {s.hilum_confidence, s.carina_confidence}) {
    if (!(c >= 0.0 && c <= 1.0)) throw DataError("confidence outside [0,1]");
  }
  if (!(s.carina_offset_mm >= 0.0)) throw DataError("carina_offset_mm must be non-negative");
}

Box square_box(Point c, int half) {
  return {static_cast<double>(c.x - half), static_cast<double>(c.y - half),
          static_cast<double>(c.x + half), static_cast<double>(c.y + half)};
}

// Largest half-size <= want that keeps the square inside the raster.
int clipped_half(Point c, int want, int w, int h) {
  return std::min({want, c.x, w - c.x, c.y, h - c.y});
}

}  // namespace

PhantomTruth generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const int w = spec.width;
  const int h = spec.height;
  const double semi_x = 0.15 * w;
  const double semi_y = 0.32 * h;
  const double cy = 0.52 * h;
  const double cx_right = 0.30 * w;
  const double cx_left = 0.70 * w;
  auto inside = [&](int x, int y, double cx) {
    const double dx = (x - cx) / semi_x;
    const double dy = (y - cy) / semi_y;
    return dx * dx + dy * dy <= 1.0;
  };

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> right(n, 0), left(n, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      right[i] = inside(x, y, cx_right);
      left[i] = inside(x, y, cx_left);
    }
  }

  const int split_row = round_half_up(cy);
  const int offset = carina_offset_px(spec.carina_offset_mm, spec.spacing_mm);
  const Point carina{w / 2, split_row - offset};
  if (carina.y < 1) {
    throw DataError("phantom too small for a " + std::to_string(spec.carina_offset_mm) +
                    " mm carina offset at " + std::to_string(spec.spacing_mm) + " mm/px");
  }
  int medial = -1;
  for (int x = 0; x < w && medial < 0; ++x) {
    if (left[static_cast<std::size_t>(split_row) * w + x]) medial = x;
  }
  if (medial < 1) throw DataError("phantom left lung does not reach the split row");
  const Point hilum{medial, split_row};

  PhantomTruth t{
      .image = GrayImage(1, 1, {0.0}, spec.spacing_mm),
      .lung_mask = {},
      .right_lung = BinaryMask(w, h, right),
      .left_lung = BinaryMask(w, h, left),
      .region_mask = RegionMask(1, 1),
      .detections = {},
      .carina_point = carina,
      .hilum_point = hilum,
      .opacity_px = {},
      .rale = {},
  };

  std::vector<std::uint8_t> lung(n), labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    lung[i] = right[i] || left[i];
    const bool upper = static_cast<int>(i / w) < split_row;
    if (right[i]) labels[i] = static_cast<std::uint8_t>(upper ? Region::RUR : Region::RLR);
    if (left[i]) labels[i] = static_cast<std::uint8_t>(upper ? Region::LUR : Region::LLR);
  }
  t.lung_mask = BinaryMask(w, h, lung);
  t.region_mask = RegionMask(w, h, labels);

  t.detections.push_back({Landmark::Carina,
                          square_box(carina, clipped_half(carina, kCarinaBoxSize / 2, w, h)),
                          spec.carina_confidence});
  const int hilum_half = clipped_half(hilum, kHilumBoxSize / 2, w, h);
  if (hilum_half < 1) throw DataError("phantom hilum box does not fit in the raster");
  t.detections.push_back({Landmark::LeftHilum, square_box(hilum, hilum_half),
                          spec.hilum_confidence});

  // Opacity: fill each region from its bottom row upward, left to right, until
  // extent/4 of its pixels are covered.
  const double delta = (spec.baseline_body - spec.baseline_lung) / 3.0;
  std::vector<double> value(n, spec.baseline_body);
  for (std::size_t i = 0; i < n; ++i) {
    if (lung[i]) value[i] = spec.baseline_lung;
  }
  for (Region r : kLungRegions) {
    const auto& score = spec.scores[region_index(r)];
    std::vector<std::size_t> pixels;
    for (int y = h - 1; y >= 0; --y) {
      for (int x = 0; x < w; ++x) {
        const auto i = static_cast<std::size_t>(y) * w + x;
        if (labels[i] == static_cast<std::uint8_t>(r)) pixels.push_back(i);
      }
    }
    const auto target =
        static_cast<std::size_t>(round_half_up(score.extent * static_cast<double>(pixels.size()) / 4.0));
    if (score.extent > 0 && target == 0) {
      throw DataError("region " + std::string(region_name(r)) + " too small for extent " +
                      std::to_string(score.extent));
    }
    for (std::size_t k = 0; k < target; ++k) value[pixels[k]] += score.density * delta;
    t.opacity_px[region_index(r)] = target;
    t.rale.push_back(make_rale_record(spec.image_id, r, score.extent, score.density));
  }

  auto rng = make_rng(spec.seed, 0);
  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = value[i];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * standard_normal(rng);
    px[i] = std::clamp(std::floor(v + 0.5), 0.0, 65535.0);
  }
  t.image = GrayImage(w, h, std::move(px), spec.spacing_mm);
  return t;
}

std::vector<BinaryMask> generate_candidate_masks(const BinaryMask& truth,
                                                 std::span<const double> rates,
                                                 std::uint64_t seed) {
  const int w = truth.width();
  const int h = truth.height();
  std::vector<std::uint8_t> boundary(truth.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool v = truth.at(x, y);
      const bool edge = (x > 0 && truth.at(x - 1, y) != v) || (x + 1 < w && truth.at(x + 1, y) != v) ||
                        (y > 0 && truth.at(x, y - 1) != v) || (y + 1 < h && truth.at(x, y + 1) != v);
      boundary[static_cast<std::size_t>(y) * w + x] = edge;
    }
  }
  std::vector<BinaryMask> out;
  out.reserve(rates.size());
  for (std::size_t k = 0; k < rates.size(); ++k) {
    const double rate = rates[k];
    if (!(rate >= 0.0 && rate < 1.0)) throw DataError("corruption rate must lie in [0,1)");
    auto rng = make_rng(seed, static_cast<std::uint32_t>(k + 1));
    std::vector<std::uint8_t> bits(truth.bits().begin(), truth.bits().end());
    if (rate > 0.0) {
      for (std::size_t i = 0; i < bits.size(); ++i) {
        const double p = boundary[i] ? rate : rate * kSpeckleFraction;
        if (uniform01(rng) < p) bits[i] ^= 1;
      }
    }
    out.emplace_back(w, h, std::move(bits));
  }
  return out;
}

std::vector<BinaryMask> generate_candidate_masks(const BinaryMask& truth, std::size_t n,
                                                 double rate, std::uint64_t seed) {
  const std::vector<double> rates(n, rate);
  return generate_candidate_masks(truth, rates, seed);
}

std::vector<PhantomSpec> severity_sweep(const PhantomSpec& base, std::size_t count) {
  std::vector<PhantomSpec> out;
  const double span = static_cast<double>(std::max<std::size_t>(count, 2) - 1);
  for (std::size_t i = 0; i < count; ++i) {
    PhantomSpec s = base;
    std::ostringstream id;
    id << base.image_id << '_' << std::setw(3) << std::setfill('0') << i;
    s.image_id = id.str();
    s.seed = base.seed + i;
    for (std::size_t k = 0; k < 4; ++k) {
      const double sev = static_cast<double>((i + k * count / 4) % count);
      s.scores[k] = {round_half_up(4.0 * sev / span), round_half_up(3.0 * sev / span)};
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

using nlohmann::json;

void apply_fields(const json& j, PhantomSpec& s) {
  if (j.contains("image_id")) s.image_id = j["image_id"].get<std::string>();
  if (j.contains("width")) s.width = j["width"].get<int>();
  if (j.contains("height")) s.height = j["height"].get<int>();
  if (j.contains("spacing_mm")) s.spacing_mm = j["spacing_mm"].get<double>();
  if (j.contains("baseline_lung")) s.baseline_lung = j["baseline_lung"].get<double>();
  if (j.contains("baseline_body")) s.baseline_body = j["baseline_body"].get<double>();
  if (j.contains("noise_sigma")) s.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("hilum_confidence")) s.hilum_confidence = j["hilum_confidence"].get<double>();
  if (j.contains("carina_confidence")) s.carina_confidence = j["carina_confidence"].get<double>();
  if (j.contains("carina_offset_mm")) s.carina_offset_mm = j["carina_offset_mm"].get<double>();
  if (j.contains("scores")) {
    for (const auto& [name, pair] : j["scores"].items()) {
      if (!pair.is_array() || pair.size() != 2) {
        throw DataError("scores." + name + " must be [extent, density]");
      }
      s.scores[region_index(parse_region(name))] = {pair[0].get<int>(), pair[1].get<int>()};
    }
  }
}

}  // namespace

SynthConfig parse_synth_config(std::string_view json_text,
                               std::optional<std::uint64_t> seed_override) {
  SynthConfig cfg;
  try {
    const json j = json::parse(json_text);
    PhantomSpec base;
    if (j.contains("defaults")) apply_fields(j["defaults"], base);
    if (seed_override) base.seed = *seed_override;

    if (j.contains("phantoms")) {
      std::size_t idx = 0;
      for (const auto& p : j["phantoms"]) {
        PhantomSpec s = base;
        s.seed = base.seed + idx++;
        apply_fields(p, s);
        if (seed_override && p.contains("seed")) s.seed = *seed_override + p["seed"].get<std::uint64_t>();
        cfg.phantoms.push_back(std::move(s));
      }
    }
    if (j.contains("severity_sweep")) {
      const auto sweep = severity_sweep(base, j["severity_sweep"].get<std::size_t>());
      cfg.phantoms.insert(cfg.phantoms.end(), sweep.begin(), sweep.end());
    }
    if (cfg.phantoms.empty()) cfg.phantoms.push_back(base);

    if (j.contains("candidates")) {
      const auto& c = j["candidates"];
      const auto count = c.value("count", std::size_t{5});
      if (count < 1) throw DataError("candidates.count must be >= 1");
      if (c.contains("corruption") && c["corruption"].is_array()) {
        cfg.corruption_rates = c["corruption"].get<std::vector<double>>();
        if (cfg.corruption_rates.size() != count && c.contains("count")) {
          throw DataError("candidates.corruption length differs from candidates.count");
        }
      } else {
        cfg.corruption_rates.assign(count, c.value("corruption", 0.0));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid synth spec: ") + e.what());
  }
  for (const auto& s : cfg.phantoms) validate(s);
  return cfg;
}

SynthConfig read_synth_config(const std::filesystem::path& path,
                              std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synth_config(buf.str(), seed_override);
}

}  // namespace lungseg
