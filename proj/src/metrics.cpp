#include "lungseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include <boost/math/special_functions/beta.hpp>

#include "lungseg/error.hpp"
#include "lungseg/textio.hpp"

namespace lungseg {

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw DataError("dice: mask dimensions differ");
  std::size_t inter = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    total += static_cast<std::size_t>(a[i]) + static_cast<std::size_t>(b[i]);
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DataError("mean_std: no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

double box_iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<PrPoint> precision_recall_curve(std::span<const TaggedDetection> predictions,
                                            std::span<const GroundTruthBox> ground_truth,
                                            Landmark cls, double iou_threshold) {
  std::vector<const GroundTruthBox*> gts;
  for (const auto& g : ground_truth) {
    if (g.landmark == cls) gts.push_back(&g);
  }
  std::vector<const TaggedDetection*> preds;
  for (const auto& p : predictions) {
    if (p.detection.landmark == cls) preds.push_back(&p);
  }
  std::stable_sort(preds.begin(), preds.end(), [](const auto* a, const auto* b) {
    return a->detection.confidence > b->detection.confidence;
  });

  std::vector<PrPoint> curve;
  if (gts.empty()) return curve;
  std::vector<bool> matched(gts.size(), false);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto* p : preds) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g] || gts[g]->image_id != p->image_id) continue;
      const double iou = box_iou(p->detection.box, gts[g]->box);
      if (iou >= iou_threshold && iou > best_iou) {
        best = g;
        best_iou = iou;
      }
    }
    if (best) {
      matched[*best] = true;
      ++tp;
    } else {
      ++fp;
    }
    curve.push_back({static_cast<double>(tp) / static_cast<double>(gts.size()),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

double all_point_average_precision(std::span<const PrPoint> curve) {
  // Sentinels (0,0) in front and (1,0) behind, then a right-to-left precision envelope.
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  for (const auto& p : curve) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i + 1 < rec.size(); ++i) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
  return ap;
}

std::optional<double> class_average_precision(std::span<const TaggedDetection> predictions,
                                              std::span<const GroundTruthBox> ground_truth,
                                              Landmark cls, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw DataError("IoU threshold must lie in (0,1]");
  }
  const bool has_gt = std::any_of(ground_truth.begin(), ground_truth.end(),
                                  [&](const auto& g) { return g.landmark == cls; });
  if (!has_gt) return std::nullopt;
  const auto curve = precision_recall_curve(predictions, ground_truth, cls, iou_threshold);
  if (curve.empty()) return 0.0;
  return all_point_average_precision(curve);
}

DetectionEvaluation mean_average_precision(std::span<const TaggedDetection> predictions,
                                           std::span<const GroundTruthBox> ground_truth,
                                           double iou_threshold) {
  DetectionEvaluation ev;
  ev.iou_threshold = iou_threshold;
  double sum = 0.0;
  int classes = 0;
  for (Landmark cls : kLandmarks) {
    const auto ap = class_average_precision(predictions, ground_truth, cls, iou_threshold);
    ev.per_class[cls] = ap;
    if (ap) {
      sum += *ap;
      ++classes;
    } else {
      ev.warnings.push_back("no ground truth for class " + std::string(landmark_name(cls)) +
                            "; excluded from mAP");
    }
  }
  if (classes == 0) throw DataError("mean_average_precision: ground truth is empty");
  ev.mean_ap = sum / classes;
  return ev;
}

std::vector<GroundTruthBox> to_ground_truth(std::span<const TaggedDetection> boxes) {
  std::vector<GroundTruthBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back({b.image_id, b.detection.landmark, b.detection.box});
  return out;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw DataError("degrees of freedom must be positive");
  if (std::isnan(t)) throw DataError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: sequences differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw DataError("pearson: need at least 3 samples");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: constant input, correlation undefined");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  double p = 0.0;
  if (std::abs(r) < 1.0) p = student_t_two_sided_p(r * std::sqrt(df / (1.0 - r * r)), df);
  return {r, p, n};
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired_t_test: sequences differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("paired_t_test: need at least 2 pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  PairedTTest res;
  res.df = n - 1;
  const bool all_equal = std::all_of(d.begin(), d.end(), [&](double v) { return v == d[0]; });
  if (all_equal) {
    if (d[0] == 0.0) return res;  // t = 0, p = 1
    res.t = d[0] > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    res.degenerate = true;
    return res;
  }
  const auto ms = mean_std(d);
  res.t = ms.mean / (ms.std / std::sqrt(static_cast<double>(n)));
  res.p_value = student_t_two_sided_p(res.t, static_cast<double>(res.df));
  return res;
}

std::string_view score_kind_name(ScoreKind k) {
  return k == ScoreKind::Extent ? "extent" : "density";
}

RaleRecord make_rale_record(std::string image_id, Region region, int extent, int density) {
  if (region == Region::Background) throw DataError("RALE record needs a lung region");
  if (extent < 0 || extent > 4) throw DataError("RALE extent outside 0-4");
  if (density < 0 || density > 3) throw DataError("RALE density outside 0-3");
  return {std::move(image_id), region, extent, density};
}

std::vector<RaleRecord> read_rale_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kRaleCsvHeader) {
    throw DataError(path.string() + ": missing or unexpected header");
  }
  std::vector<RaleRecord> out;
  std::set<std::pair<std::string, Region>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw DataError(where + ": expected 4 fields");
    try {
      auto rec = make_rale_record(f[0], parse_region(f[1]),
                                  static_cast<int>(parse_int(f[2], "extent")),
                                  static_cast<int>(parse_int(f[3], "density")));
      if (!seen.emplace(rec.image_id, rec.region).second) {
        throw DataError("duplicate (image_id, region)");
      }
      out.push_back(std::move(rec));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void write_rale_csv(std::span<const RaleRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kRaleCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.image_id << ',' << region_name(r.region) << ',' << r.extent << ',' << r.density
        << '\n';
  }
}

std::map<std::string, int> rale_totals(std::span<const RaleRecord> records) {
  std::map<std::string, int> totals;
  for (const auto& r : records) totals[r.image_id] += r.extent * r.density;
  return totals;
}

std::vector<JoinedSample> join_stats_rale(std::span<const RegionStats> stats,
                                          std::span<const RaleRecord> scores,
                                          bool filter_positive_total) {
  std::map<std::pair<std::string, Region>, const RaleRecord*> by_key;
  for (const auto& r : scores) by_key[{r.image_id, r.region}] = &r;
  const auto totals = rale_totals(scores);
  std::vector<JoinedSample> out;
  for (const auto& s : stats) {
    if (filter_positive_total) {
      const auto t = totals.find(s.image_id);
      if (t == totals.end() || t->second == 0) continue;
    }
    for (Region r : kLungRegions) {
      const auto& mean = s[r].mean_normalized_intensity;
      const auto it = by_key.find({s.image_id, r});
      if (!mean || it == by_key.end()) continue;
      out.push_back({s.image_id, r, *mean, *it->second});
    }
  }
  return out;
}

std::vector<CorrelationResult> correlate_rale(std::span<const RegionStats> stats,
                                              std::span<const RaleRecord> scores,
                                              bool filter_positive_total) {
  const auto samples = join_stats_rale(stats, scores, filter_positive_total);
  std::vector<CorrelationResult> out;
  for (Region region : kLungRegions) {
    for (ScoreKind kind : kScoreKinds) {
      std::vector<double> x;
      std::vector<double> y;
      for (const auto& s : samples) {
        if (s.region != region) continue;
        x.push_back(s.intensity);
        y.push_back(s.score.score(kind));
      }
      CorrelationResult cell;
      cell.region = region;
      cell.score_kind = kind;
      cell.n = x.size();
      if (x.size() < 3) {
        cell.error = "fewer than 3 joined samples";
      } else {
        try {
          const auto pr = pearson(x, y);
          cell.r = pr.r;
          cell.p_value = pr.p_value;
        } catch (const DataError& e) {
          cell.error = e.what();
        }
      }
      out.push_back(std::move(cell));
    }
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<BoxplotBin> boxplot_bins(std::span<const JoinedSample> samples) {
  std::map<std::tuple<Region, ScoreKind, int>, std::vector<double>> bins;
  for (const auto& s : samples) {
    for (ScoreKind k : kScoreKinds) bins[{s.region, k, s.score.score(k)}].push_back(s.intensity);
  }
  std::vector<BoxplotBin> out;
  for (auto& [key, values] : bins) {
    std::sort(values.begin(), values.end());
    BoxplotBin b;
    std::tie(b.region, b.score_kind, b.score) = key;
    b.n = values.size();
    b.min = values.front();
    b.q1 = quantile_sorted(values, 0.25);
    b.median = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    b.max = values.back();
    out.push_back(b);
  }
  return out;
}

}  // namespace lungseg
