#include "lungseg/landmarks.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lungseg/error.hpp"
#include "lungseg/textio.hpp"

namespace lungseg {

using nlohmann::json;

std::string_view landmark_name(Landmark l) {
  return l == Landmark::Carina ? "carina" : "left_hilum";
}

Landmark parse_landmark(std::string_view name) {
  if (name == "carina") return Landmark::Carina;
  if (name == "left_hilum") return Landmark::LeftHilum;
  throw DataError("unknown landmark '" + std::string(name) + "'");
}

std::string_view reference_source_name(ReferenceSource s) {
  return s == ReferenceSource::Hilum ? "hilum" : "carina";
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

Point box_center(const Box& box) {
  return {round_half_up((box.x_min + box.x_max) / 2.0),
          round_half_up((box.y_min + box.y_max) / 2.0)};
}

int carina_offset_px(double offset_mm, double spacing_mm) {
  if (!(spacing_mm > 0.0)) throw DataError("spacing_mm must be positive");
  if (offset_mm < 0.0) throw DataError("carina offset must be non-negative");
  return round_half_up(offset_mm / spacing_mm);
}

std::optional<Detection> best_detection(std::span<const Detection> detections,
                                        Landmark landmark) {
  std::optional<Detection> best;
  for (const auto& d : detections) {
    if (d.landmark != landmark) continue;
    if (!best || d.confidence > best->confidence ||
        (d.confidence == best->confidence &&
         (d.box.y_min < best->box.y_min ||
          (d.box.y_min == best->box.y_min && d.box.x_min < best->box.x_min)))) {
      best = d;
    }
  }
  return best;
}

ReferencePoint select_reference_point(std::span<const Detection> detections, double spacing_mm,
                                      const ReferenceConfig& cfg,
                                      std::optional<int> image_height) {
  if (!(spacing_mm > 0.0)) throw DataError("spacing_mm must be positive");
  if (cfg.confidence_threshold < 0.0 || cfg.confidence_threshold > 1.0) {
    throw DataError("confidence threshold must lie in [0,1]");
  }
  const auto hilum = best_detection(detections, Landmark::LeftHilum);
  const auto carina = best_detection(detections, Landmark::Carina);

  ReferencePoint ref;
  if (hilum) ref.hilum_confidence = hilum->confidence;
  if (carina) {
    ref.carina_confidence = carina->confidence;
    ref.carina_center = box_center(carina->box);
  }

  if (hilum && hilum->confidence > cfg.confidence_threshold) {
    ref.point = box_center(hilum->box);
    ref.source = ReferenceSource::Hilum;
  } else if (carina) {
    ref.point = *ref.carina_center;
    ref.point.y += carina_offset_px(cfg.carina_offset_mm, spacing_mm);
    ref.source = ReferenceSource::Carina;
  } else {
    throw DataError(hilum ? "left hilum confidence at or below threshold and no carina detection"
                          : "no usable landmark detection");
  }
  if (image_height && (ref.point.y < 0 || ref.point.y >= *image_height)) {
    throw DataError("reference row " + std::to_string(ref.point.y) + " outside image of height " +
                    std::to_string(*image_height));
  }
  return ref;
}

TaggedDetection parse_detection_line(std::string_view line, bool require_confidence) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed detection line: ") + e.what());
  }
  try {
    TaggedDetection t;
    t.image_id = j.at("image_id").get<std::string>();
    t.detection.landmark = parse_landmark(j.at("landmark").get<std::string>());
    const auto& b = j.at("box");
    if (!b.is_array() || b.size() != 4) throw DataError("box must have 4 coordinates");
    t.detection.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>()};
    if (!t.detection.box.valid()) throw DataError("box must satisfy x_min<x_max, y_min<y_max");
    if (j.contains("confidence")) {
      t.detection.confidence = j["confidence"].get<double>();
    } else if (require_confidence) {
      throw DataError("detection without confidence");
    } else {
      t.detection.confidence = 1.0;
    }
    if (!(t.detection.confidence >= 0.0 && t.detection.confidence <= 1.0)) {
      throw DataError("confidence outside [0,1]");
    }
    return t;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed detection record: ") + e.what());
  }
}

std::string detection_to_json_line(const TaggedDetection& d) {
  const auto& b = d.detection.box;
  json j = {{"image_id", d.image_id},
            {"landmark", landmark_name(d.detection.landmark)},
            {"box", {b.x_min, b.y_min, b.x_max, b.y_max}},
            {"confidence", d.detection.confidence}};
  return j.dump();
}

std::vector<TaggedDetection> read_detections_jsonl(const std::filesystem::path& path,
                                                   bool require_confidence) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<TaggedDetection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_detection_line(line, require_confidence));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_detections_jsonl(std::span<const TaggedDetection> detections,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : detections) out << detection_to_json_line(d) << "\n";
}

std::vector<Detection> detections_for(std::span<const TaggedDetection> all,
                                      std::string_view image_id) {
  std::vector<Detection> out;
  for (const auto& t : all) {
    if (t.image_id == image_id) out.push_back(t.detection);
  }
  return out;
}

}  // namespace lungseg
