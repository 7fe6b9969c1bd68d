// Acceptance suite: one [PASS]/[FAIL] line per criterion. Exit status is the
// number of failed criteria (capped at 125).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lungseg/ensemble.hpp"
#include "lungseg/error.hpp"
#include "lungseg/landmarks.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/pipeline.hpp"
#include "lungseg/quantify.hpp"
#include "lungseg/regions.hpp"
#include "lungseg/synth.hpp"
#include "oracles.hpp"

using namespace lungseg;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kBudget1 = 5.0;   // s
constexpr double kBudget2 = 30.0;  // s
constexpr double kBudget5 = 20.0;  // s
constexpr double kBudget8 = 60.0;  // s
constexpr double kShiftTol = 1e-9;
constexpr double kPearsonRTol = 1e-9;
constexpr double kPValueTol = 1e-6;
constexpr double kMinR = 0.9;
constexpr double kMaxP = 0.001;
constexpr double kSignificance = 0.05;

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch_root() {
  auto root = fs::temp_directory_path() / ("lungseg_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// --- 1 ---------------------------------------------------------------------
Verdict majority_vote_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20200101);
  std::bernoulli_distribution flip(0.35);
  std::size_t pixels = 0, agree = 0;
  for (int pattern = 0; pattern < 512; ++pattern) {
    std::vector<std::uint8_t> bits(9);
    for (int i = 0; i < 9; ++i) bits[i] = (pattern >> i) & 1;
    std::vector<BinaryMask> masks;
    for (int k = 0; k < 5; ++k) {
      auto b = bits;
      for (auto& v : b) v = flip(rng) ? !v : v;
      masks.emplace_back(3, 3, b);
    }
    const auto got = majority_vote(masks);
    const auto want = oracle::majority_by_count(masks);
    for (std::size_t i = 0; i < 9; ++i) {
      ++pixels;
      agree += got[i] == want[i];
    }
  }
  const double dt = seconds_since(t0);
  return {agree == pixels && dt < kBudget1,
          std::to_string(agree) + "/" + std::to_string(pixels) + " pixels agree, " + fmt(dt, 3) + " s"};
}

// --- 2 / 3 ----------------------------------------------------------------
const std::vector<double> kScenarioRates{0.0, 0.0, 0.0, 0.3, 0.3};

Verdict ensemble_robustness() {
  const auto t0 = Clock::now();
  int exact = 0, corrupted_below = 0;
  for (int i = 0; i < 50; ++i) {
    PhantomSpec s;
    s.seed = 1000 + i;
    s.noise_sigma = 15.0;
    const auto t = generate_phantom(s);
    const auto c = generate_candidate_masks(t.lung_mask, kScenarioRates, s.seed);
    const auto fused = postprocess(majority_vote(c));
    exact += dice(fused, t.lung_mask) == 1.0;
    corrupted_below += (dice(c[3], t.lung_mask) < 1.0) + (dice(c[4], t.lung_mask) < 1.0);
  }
  const double dt = seconds_since(t0);
  return {exact == 50 && corrupted_below == 100 && dt < kBudget2,
          "ensemble Dice 1.0 in " + std::to_string(exact) + "/50, corrupted < 1.0 in " +
              std::to_string(corrupted_below) + "/100, " + fmt(dt, 3) + " s"};
}

Verdict seg_table(const fs::path& root) {
  const auto dir = root / "c3";
  SynthConfig cfg;
  for (int i = 0; i < 50; ++i) {
    PhantomSpec s;
    s.image_id = "c3_" + std::to_string(i);
    s.seed = 1000 + i;
    s.noise_sigma = 15.0;
    cfg.phantoms.push_back(s);
  }
  cfg.corruption_rates = kScenarioRates;
  const auto synth = write_synth_dataset(cfg, dir);
  const auto run = run_pipeline(read_manifest(synth.manifest), {});
  std::vector<NamedDir> models;
  for (std::size_t k = 1; k <= kScenarioRates.size(); ++k) {
    models.push_back({"model" + std::to_string(k), dir / ("model" + std::to_string(k))});
  }
  const auto ev = evaluate_segmentation(models, {"ensemble", run.out_dir / "fused"}, dir / "gt");
  std::ostringstream csv;
  write_seg_table_csv(ev, csv);
  std::vector<std::string> lines;
  std::istringstream in(csv.str());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  const auto& ens = ev.rows.back();
  bool ok = run.exit_code == kExitOk && ens.name == "ensemble";
  std::string detail = "ensemble " + fmt(ens.summary.mean);
  for (std::size_t k : {3u, 4u}) {
    const auto& row = ev.rows[k];
    const bool starred = lines.at(k + 1).ends_with("*");
    ok = ok && ens.summary.mean > row.summary.mean && row.vs_ensemble &&
         row.vs_ensemble->p_value < kSignificance && starred;
    detail += ", " + row.name + " " + fmt(row.summary.mean) + " p=" +
              fmt(row.vs_ensemble ? row.vs_ensemble->p_value : 1.0, 3) + (starred ? " *" : "");
  }
  // Exact models tie with the ensemble and must not be starred.
  for (std::size_t k : {0u, 1u, 2u}) ok = ok && !lines.at(k + 1).ends_with("*");
  return {ok, detail};
}

// --- 4 ---------------------------------------------------------------------
Verdict reference_rule() {
  const Box hilum{140, 120, 164, 144};
  const Box carina{78, 0, 178, 66};
  auto ref = [&](double hc, double cc) {
    const std::vector<Detection> d{{Landmark::LeftHilum, hilum, hc}, {Landmark::Carina, carina, cc}};
    return select_reference_point(d, 0.2);
  };
  const auto a = ref(0.94, 0.98);
  const auto b = ref(0.56, 0.95);
  const auto c = ref(0.90, 0.95);
  const bool ok_a = a.source == ReferenceSource::Hilum && a.point == Point{152, 132};
  const bool ok_b = b.source == ReferenceSource::Carina && b.point == Point{128, 133};
  const bool ok_c = c.source == ReferenceSource::Carina && c.point == Point{128, 133};
  const bool ok_d = carina_offset_px(20.0, 0.2) == 100 && b.point.y - b.carina_center->y == 100;
  return {ok_a && ok_b && ok_c && ok_d,
          std::string("0.94->") + std::string(reference_source_name(a.source)) + ", 0.56->" +
              std::string(reference_source_name(b.source)) + ", 0.90->" +
              std::string(reference_source_name(c.source)) + ", offset " +
              std::to_string(b.point.y - b.carina_center->y) + " px"};
}

// --- 5 ---------------------------------------------------------------------
Verdict region_partition() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0, checked = 0;
  for (int i = 0; i < 200; ++i) {
    PhantomSpec s;
    s.image_id = "r" + std::to_string(i);
    s.width = 96 + static_cast<int>(rng() % 161);
    s.height = 96 + static_cast<int>(rng() % 161);
    s.spacing_mm = 20.0 / (s.height * (0.125 + 0.125 * u(rng)));
    s.noise_sigma = 40.0 * u(rng);
    s.seed = rng();
    s.hilum_confidence = 0.5 + 0.5 * u(rng);
    for (auto& sc : s.scores) sc = {static_cast<int>(rng() % 5), static_cast<int>(rng() % 4)};
    const auto t = generate_phantom(s);
    const double rate = 0.3 * u(rng);
    const auto cand = generate_candidate_masks(t.lung_mask, std::vector<double>{0, 0, rate, rate, rate}, s.seed);
    const auto fused = postprocess(majority_vote(cand));
    const auto ref = select_reference_point(t.detections, s.spacing_mm, {}, s.height);
    const int fallback = ref.carina_center ? ref.carina_center->x : ref.point.x;
    const auto lungs = split_left_right(fused, fallback);
    const auto rm = split_four_regions(lungs.right, lungs.left, ref.point);
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        ++checked;
        const Region r = rm.at(x, y);
        const bool in_lung = fused.at(x, y);
        bool ok = (r != Region::Background) == in_lung;
        ok = ok && !(lungs.right.at(x, y) && lungs.left.at(x, y));
        if (r == Region::RUR || r == Region::LUR) ok = ok && y < ref.point.y;
        if (r == Region::RLR || r == Region::LLR) ok = ok && y >= ref.point.y;
        if (r == Region::RUR || r == Region::RLR) ok = ok && lungs.right.at(x, y);
        if (r == Region::LUR || r == Region::LLR) ok = ok && lungs.left.at(x, y);
        violations += !ok;
      }
    }
  }
  const double dt = seconds_since(t0);
  return {violations == 0 && dt < kBudget5,
          std::to_string(violations) + " violations over " + std::to_string(checked) + " pixels, " +
              fmt(dt, 3) + " s"};
}

// --- 6 ---------------------------------------------------------------------
Verdict shift_invariance() {
  double worst_mean = 0.0, worst_bg = 0.0;
  bool fields_ok = true;
  for (int i = 0; i < 20; ++i) {
    PhantomSpec s;
    s.seed = 600 + i;
    s.noise_sigma = 30.0;
    for (std::size_t k = 0; k < 4; ++k) s.scores[k] = {(i + static_cast<int>(k)) % 5, (i + 2 * static_cast<int>(k)) % 4};
    const auto t = generate_phantom(s);
    const auto base = normalize_and_quantify(s.image_id, t.image, t.lung_mask, t.region_mask);
    for (double c : {1.0, 10.0, 1000.0}) {
      std::vector<double> px(t.image.pixels().begin(), t.image.pixels().end());
      for (auto& v : px) v += c;
      const GrayImage shifted(t.image.width(), t.image.height(), px, t.image.spacing_mm());
      const auto st = normalize_and_quantify(s.image_id, shifted, t.lung_mask, t.region_mask);
      fields_ok = fields_ok && st.image_id == base.image_id;
      worst_bg = std::max(worst_bg, std::abs(st.background_mean - c - base.background_mean));
      for (std::size_t k = 0; k < 4; ++k) {
        fields_ok = fields_ok && st.regions[k].area_px == base.regions[k].area_px &&
                    st.regions[k].mean_normalized_intensity.has_value() ==
                        base.regions[k].mean_normalized_intensity.has_value();
        if (st.regions[k].mean_normalized_intensity && base.regions[k].mean_normalized_intensity) {
          worst_mean = std::max(worst_mean, std::abs(*st.regions[k].mean_normalized_intensity -
                                                     *base.regions[k].mean_normalized_intensity));
        }
      }
    }
  }
  return {fields_ok && worst_mean <= kShiftTol && worst_bg <= kShiftTol,
          "max |d mean| " + fmt(worst_mean, 3) + ", max |d background - c| " + fmt(worst_bg, 3)};
}

// --- 7 ---------------------------------------------------------------------
Verdict statistics_oracles() {
  const std::vector<double> x{1, 2, 3}, y{1, 2, 4};
  const double r = pearson(x, y).r;
  const double r_err = std::abs(r - 9.0 / (2.0 * std::sqrt(21.0)));

  std::mt19937_64 rng(777);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_p = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 3 + rng() % 8;
    std::vector<double> a(n), b(n);
    for (std::size_t j = 0; j < n; ++j) {
      a[j] = z(rng);
      b[j] = 0.5 * a[j] + z(rng);
    }
    const auto pr = pearson(a, b);
    const double t = pr.r * std::sqrt((n - 2.0) / (1.0 - pr.r * pr.r));
    worst_p = std::max(worst_p, std::abs(pr.p_value - oracle::t_two_sided_p(t, n - 2.0)));
    const auto tt = paired_t_test(a, b);
    worst_p = std::max(worst_p, std::abs(tt.p_value - oracle::t_two_sided_p(tt.t, n - 1.0)));
  }

  const BinaryMask da(4, 1, {1, 1, 0, 0}), db(4, 1, {0, 1, 1, 0});
  const double d = dice(da, db);
  const std::vector<GroundTruthBox> gt{{"a", Landmark::Carina, {0, 0, 10, 10}},
                                       {"b", Landmark::Carina, {0, 0, 10, 10}}};
  const std::vector<TaggedDetection> pred{{"a", {Landmark::Carina, {0, 0, 10, 10}, 0.9}},
                                          {"b", {Landmark::Carina, {40, 40, 50, 50}, 0.8}}};
  const double ap = *class_average_precision(pred, gt, Landmark::Carina, 0.5);
  return {r_err <= kPearsonRTol && worst_p <= kPValueTol && d == 0.5 && ap == 0.5,
          "r=" + fmt(r, 9) + " (err " + fmt(r_err, 2) + "), max p err " + fmt(worst_p, 2) +
              ", dice " + fmt(d) + ", AP " + fmt(ap)};
}

// --- 8 ---------------------------------------------------------------------
PhantomSpec sweep_base() {
  PhantomSpec base;
  base.image_id = "sweep";
  base.noise_sigma = 20.0;
  base.seed = 8000;
  return base;
}

CorrelateRun sweep_run(const std::vector<PhantomSpec>& phantoms, const fs::path& dir) {
  SynthConfig cfg;
  cfg.phantoms = phantoms;
  cfg.corruption_rates = {0.0, 0.0, 0.0, 0.1, 0.1};
  const auto synth = write_synth_dataset(cfg, dir);
  const auto run = run_pipeline(read_manifest(synth.manifest), {});
  if (run.exit_code != kExitOk) throw DataError("sweep pipeline did not complete");
  return run_correlate(run.out_dir / kStatsCsvName, dir / "rale.csv", true, dir / "correlation");
}

Verdict correlation_recovery(const fs::path& root) {
  const auto t0 = Clock::now();
  const auto res = sweep_run(severity_sweep(sweep_base(), 100), root / "c8");
  const double dt = seconds_since(t0);
  bool ok = res.cells.size() == 8 && dt < kBudget8;
  double min_r = 1.0, max_p = 0.0;
  for (const auto& c : res.cells) {
    ok = ok && c.r && c.p_value && *c.r > kMinR && *c.p_value < kMaxP;
    if (c.r) min_r = std::min(min_r, *c.r);
    max_p = std::max(max_p, c.p_value.value_or(1.0));
  }
  std::string detail = "min r " + fmt(min_r, 4) + ", max p " + fmt(max_p, 3) + ", " + fmt(dt, 3) + " s;";
  for (const auto& c : res.cells) {
    detail += " " + std::string(region_name(c.region)) + "/" + std::string(score_kind_name(c.score_kind)) +
              "=" + (c.r ? fmt(*c.r, 3) : "n/a");
  }
  return {ok, detail};
}

// Independent extent x density grid, for information only.
std::string grid_information(const fs::path& root) {
  std::vector<PhantomSpec> grid;
  const auto base = sweep_base();
  for (int i = 0; i < 100; ++i) {
    PhantomSpec s = base;
    s.image_id = "grid_" + std::to_string(i);
    s.seed = base.seed + i;
    for (int k = 0; k < 4; ++k) {
      const int cell = (i + 5 * k) % 20;
      s.scores[k] = {cell / 4, cell % 4};
    }
    grid.push_back(s);
  }
  const auto res = sweep_run(grid, root / "grid");
  std::string out;
  for (const auto& c : res.cells) {
    out += " " + std::string(region_name(c.region)) + "/" + std::string(score_kind_name(c.score_kind)) +
           "=" + (c.r ? fmt(*c.r, 3) : "n/a");
  }
  return out;
}

// --- 9 ---------------------------------------------------------------------
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return files;
}

Verdict determinism(const fs::path& root) {
  auto once = [&](const std::string& name) {
    const auto dir = root / name;
    auto specs = severity_sweep(sweep_base(), 24);
    SynthConfig cfg;
    cfg.phantoms = specs;
    cfg.corruption_rates = {0.0, 0.0, 0.1, 0.2, 0.3};
    const auto synth = write_synth_dataset(cfg, dir / "data");
    PipelineOptions opts;
    opts.out_dir = dir / "run";
    const auto run = run_pipeline(read_manifest(synth.manifest), opts);
    (void)run_correlate(run.out_dir / kStatsCsvName, dir / "data" / "rale.csv", true, dir / "run" / "correlation");
    return tree(dir);
  };
  const auto a = once("d1");
  const auto b = once("d2");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  return {differing == 0 && !a.empty(),
          std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  const auto root = scratch_root();
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "majority-vote oracle equivalence", majority_vote_oracle},
      {2, "ensemble robustness", ensemble_robustness},
      {3, "segmentation comparison table", [&] { return seg_table(root); }},
      {4, "reference-point rule", reference_rule},
      {5, "region partition invariants", region_partition},
      {6, "normalization shift invariance", shift_invariance},
      {7, "statistics oracles", statistics_oracles},
      {8, "end-to-end correlation recovery", [&] { return correlation_recovery(root); }},
      {9, "determinism", [&] { return determinism(root); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": " << v.detail << std::endl;
  }
  try {
    std::cout << "[INFO] independent extent x density grid r:" << grid_information(root) << std::endl;
  } catch (const std::exception& e) {
    std::cout << "[INFO] grid run failed: " << e.what() << std::endl;
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return std::min(failed, 125);
}
