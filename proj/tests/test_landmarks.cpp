#include <doctest.h>

#include <fstream>
#include <random>

#include "lungseg/error.hpp"
#include "lungseg/landmarks.hpp"
#include "test_util.hpp"

using namespace lungseg;

namespace {

Detection det(Landmark l, Box b, double conf) { return {l, b, conf}; }

const Box kHilumBox{140, 120, 164, 144};  // center (152, 132)
const Box kCarinaBox{78, 0, 178, 66};     // center (128, 33)

}  // namespace

TEST_CASE("box_center rounds half up") {
  CHECK(box_center({0, 0, 10, 10}) == Point{5, 5});
  CHECK(box_center({10, 20, 11, 21}) == Point{11, 21});
  CHECK(box_center({-3, -3, 0, 0}) == Point{-1, -1});  // -1.5 -> -1
}

TEST_CASE("a 100 px box centered on an annotated carina point recovers the point") {
  const Point carina{612, 387};
  const Box box{carina.x - 50.0, carina.y - 50.0, carina.x + 50.0, carina.y + 50.0};
  CHECK(box.x_max - box.x_min == 100.0);
  CHECK(box_center(box) == carina);
}

TEST_CASE("confident hilum is used directly") {
  const std::vector<Detection> d{det(Landmark::LeftHilum, kHilumBox, 0.94),
                                 det(Landmark::Carina, kCarinaBox, 0.98)};
  const auto ref = select_reference_point(d, 0.2);
  CHECK(ref.source == ReferenceSource::Hilum);
  CHECK(ref.point == Point{152, 132});
  CHECK(ref.hilum_confidence == 0.94);
  CHECK(ref.carina_confidence == 0.98);
}

TEST_CASE("low-confidence hilum falls back to carina + 2 cm") {
  const std::vector<Detection> d{det(Landmark::LeftHilum, kHilumBox, 0.56),
                                 det(Landmark::Carina, kCarinaBox, 0.95)};
  const auto ref = select_reference_point(d, 0.2);
  CHECK(ref.source == ReferenceSource::Carina);
  CHECK(ref.point == Point{128, 133});
  CHECK(carina_offset_px(20.0, 0.2) == 100);
}

TEST_CASE("hilum confidence exactly at the threshold falls back to carina") {
  const std::vector<Detection> d{det(Landmark::LeftHilum, kHilumBox, 0.90),
                                 det(Landmark::Carina, kCarinaBox, 0.95)};
  CHECK(select_reference_point(d, 0.2).source == ReferenceSource::Carina);
  const std::vector<Detection> above{det(Landmark::LeftHilum, kHilumBox, std::nextafter(0.9, 1.0)),
                                     det(Landmark::Carina, kCarinaBox, 0.95)};
  CHECK(select_reference_point(above, 0.2).source == ReferenceSource::Hilum);
}

TEST_CASE("reference point error paths") {
  const std::vector<Detection> weak_hilum{det(Landmark::LeftHilum, kHilumBox, 0.5)};
  CHECK_THROWS_AS(select_reference_point(weak_hilum, 0.2), DataError);
  CHECK_THROWS_AS(select_reference_point(std::vector<Detection>{}, 0.2), DataError);
  const std::vector<Detection> carina_only{det(Landmark::Carina, kCarinaBox, 0.9)};
  CHECK_NOTHROW(select_reference_point(carina_only, 0.2, {}, 256));
  // 33 + 100 = 133 is outside a 120-row image.
  CHECK_THROWS_AS(select_reference_point(carina_only, 0.2, {}, 120), DataError);
  CHECK_THROWS_AS(select_reference_point(carina_only, 0.0), DataError);
}

TEST_CASE("carina offset is exactly round(offset/spacing) for many spacings") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> spacing(0.05, 3.0);
  std::uniform_real_distribution<double> offset(0.0, 40.0);
  const std::vector<Detection> d{det(Landmark::Carina, kCarinaBox, 0.99)};
  for (int i = 0; i < 500; ++i) {
    const double s = spacing(rng);
    const ReferenceConfig cfg{0.9, offset(rng)};
    const auto ref = select_reference_point(d, s, cfg);
    CHECK(ref.point.y - 33 == static_cast<int>(std::floor(cfg.carina_offset_mm / s + 0.5)));
  }
}

TEST_CASE("only the best detection per class matters") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    std::vector<Detection> d{det(Landmark::LeftHilum, kHilumBox, conf(rng)),
                             det(Landmark::Carina, kCarinaBox, conf(rng))};
    const auto base = select_reference_point(d, 0.2);
    // A lower-confidence duplicate somewhere else never changes the result.
    auto extra = d;
    const auto& pick = d[rng() % 2];
    extra.push_back(det(pick.landmark, {0, 0, 5, 5}, pick.confidence * conf(rng) * 0.999));
    const auto again = select_reference_point(extra, 0.2);
    CHECK(again.point == base.point);
    CHECK(again.source == base.source);
  }
}

TEST_CASE("equal-confidence duplicates tie-break on y_min then x_min") {
  const std::vector<Detection> d{det(Landmark::LeftHilum, {50, 60, 60, 70}, 0.95),
                                 det(Landmark::LeftHilum, {10, 40, 20, 50}, 0.95),
                                 det(Landmark::LeftHilum, {0, 40, 10, 50}, 0.95)};
  const auto best = best_detection(d, Landmark::LeftHilum);
  REQUIRE(best);
  CHECK(best->box == Box{0, 40, 10, 50});
}

TEST_CASE("raising the threshold only moves the source from hilum to carina") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const std::vector<Detection> d{det(Landmark::LeftHilum, kHilumBox, u(rng)),
                                   det(Landmark::Carina, kCarinaBox, u(rng))};
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const auto a = select_reference_point(d, 0.2, {lo, 20.0});
    const auto b = select_reference_point(d, 0.2, {hi, 20.0});
    if (a.source == ReferenceSource::Carina) CHECK(b.source == ReferenceSource::Carina);
  }
}

TEST_CASE("detection JSONL parsing") {
  const auto t = parse_detection_line(
      R"({"image_id": "p1", "landmark": "left_hilum", "box": [1, 2, 3.5, 4], "confidence": 0.94})");
  CHECK(t.image_id == "p1");
  CHECK(t.detection.landmark == Landmark::LeftHilum);
  CHECK(t.detection.box == Box{1, 2, 3.5, 4});
  CHECK(t.detection.confidence == 0.94);
  CHECK(parse_detection_line(detection_to_json_line(t)).detection.box == t.detection.box);

  CHECK_THROWS_AS(parse_detection_line(R"({"image_id":"p","landmark":"aorta","box":[0,0,1,1],"confidence":1})"),
                  DataError);
  CHECK_THROWS_AS(parse_detection_line(R"({"image_id":"p","landmark":"carina","box":[0,0,1],"confidence":1})"),
                  DataError);
  CHECK_THROWS_AS(parse_detection_line(R"({"image_id":"p","landmark":"carina","box":[2,0,1,1],"confidence":1})"),
                  DataError);
  CHECK_THROWS_AS(parse_detection_line(R"({"image_id":"p","landmark":"carina","box":[0,0,1,1],"confidence":1.5})"),
                  DataError);
  CHECK_THROWS_AS(parse_detection_line(R"({"image_id":"p","landmark":"carina","box":[0,0,1,1]})"),
                  DataError);
  CHECK(parse_detection_line(R"({"image_id":"p","landmark":"carina","box":[0,0,1,1]})", false)
            .detection.confidence == 1.0);
  CHECK_THROWS_AS(parse_detection_line("{not json"), DataError);
}

TEST_CASE("detections file round trip and per-image filtering") {
  testutil::TempDir tmp("landmarks");
  const std::vector<TaggedDetection> all{{"a", det(Landmark::Carina, kCarinaBox, 0.9)},
                                         {"b", det(Landmark::LeftHilum, kHilumBox, 0.8)},
                                         {"a", det(Landmark::LeftHilum, kHilumBox, 0.7)}};
  write_detections_jsonl(all, tmp / "d.jsonl");
  const auto back = read_detections_jsonl(tmp / "d.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(detections_for(back, "a").size() == 2);
  CHECK(detections_for(back, "b").size() == 1);
  CHECK(detections_for(back, "c").empty());
  std::ofstream(tmp / "bad.jsonl") << "{}\n";
  CHECK_THROWS_AS(read_detections_jsonl(tmp / "bad.jsonl"), DataError);
  CHECK_THROWS_AS(read_detections_jsonl(tmp / "none.jsonl"), IoError);
}
