// lungseg: four-region lung partition and evaluation from the command line.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lungseg/ensemble.hpp"
#include "lungseg/error.hpp"
#include "lungseg/landmarks.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/pipeline.hpp"
#include "lungseg/quantify.hpp"
#include "lungseg/regions.hpp"
#include "lungseg/synth.hpp"
#include "lungseg/textio.hpp"

namespace {

using namespace lungseg;

struct Globals {
  std::optional<double> spacing_mm;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void warn_default_spacing(const SpacingResolution& s) {
  if (s.source == SpacingSource::Default) {
    std::cerr << "warning: pixel spacing not given; using default " << format_real(s.spacing_mm)
              << " mm/px\n";
  }
}

fs::path require_out_dir(const Globals& g, const char* cmd) {
  if (!g.out_dir) throw CLI::RequiredError(std::string(cmd) + " needs --out-dir");
  return *g.out_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Four-region lung segmentation pipeline for chest radiographs"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--spacing-mm", g.spacing_mm, "Pixel spacing in mm (default: sidecar, else 0.2)")
      ->check(CLI::PositiveNumber);
  app.add_option("--jobs", g.jobs, "Worker threads (default: all cores)");
  app.add_option("--seed", g.seed, "Seed override for synthetic data");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "Majority-vote candidate lung masks");
  std::vector<std::string> ens_masks;
  std::string ens_out;
  std::size_t ens_keep = 2;
  bool ens_raw = false;
  ens->add_option("--masks", ens_masks, "Candidate mask files")->required()->expected(1, -1);
  ens->add_option("--out", ens_out, "Fused mask output")->required();
  ens->add_option("--keep", ens_keep, "Connected components to keep")->check(CLI::PositiveNumber);
  ens->add_flag("--no-postprocess", ens_raw, "Skip hole filling and isolated-region removal");

  // landmarks
  auto* lm = app.add_subcommand("landmarks", "Select the upper/lower reference point");
  std::string lm_dets, lm_id, lm_image;
  std::optional<int> lm_height;
  ReferenceConfig lm_cfg;
  lm->add_option("--detections", lm_dets, "Detections JSONL")->required();
  lm->add_option("--image-id", lm_id, "Image id to select")->required();
  lm->add_option("--image", lm_image, "Image file (bounds check, spacing sidecar)");
  lm->add_option("--height", lm_height, "Image height for bounds checking");
  lm->add_option("--threshold", lm_cfg.confidence_threshold, "Hilum confidence threshold")
      ->check(CLI::Range(0.0, 1.0));
  lm->add_option("--offset-mm", lm_cfg.carina_offset_mm, "Carina offset in mm")
      ->check(CLI::NonNegativeNumber);

  // split
  auto* sp = app.add_subcommand("split", "Split a lung mask into RUR/RLR/LUR/LLR");
  std::string sp_mask, sp_out, sp_right, sp_left;
  int sp_ref_y = 0;
  std::optional<int> sp_ref_x;
  sp->add_option("--mask", sp_mask, "Fused lung mask")->required();
  sp->add_option("--ref-y", sp_ref_y, "Reference row")->required();
  sp->add_option("--ref-x", sp_ref_x, "Fallback column when the lungs are fused");
  sp->add_option("--out", sp_out, "Region mask output (codes 0-4)")->required();
  sp->add_option("--right-out", sp_right, "Right lung mask output");
  sp->add_option("--left-out", sp_left, "Left lung mask output");

  // quantify
  auto* qt = app.add_subcommand("quantify", "Normalized mean intensity per region");
  std::string qt_image, qt_lung, qt_regions, qt_id, qt_out;
  QuantifyOptions qt_opts;
  qt->add_option("--image", qt_image, "Radiograph")->required();
  qt->add_option("--lung", qt_lung, "Lung mask")->required();
  qt->add_option("--regions", qt_regions, "Region mask")->required();
  qt->add_option("--image-id", qt_id, "Image id for the CSV")->required();
  qt->add_option("--crop-border", qt_opts.crop_border, "Exclude this many edge pixels from the background")
      ->check(CLI::NonNegativeNumber);
  qt->add_option("--out", qt_out, "CSV output (default: stdout)");

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Run the full pipeline over a manifest");
  std::string pl_manifest;
  PipelineOptions pl_opts;
  pl->add_option("--manifest", pl_manifest, "Run manifest JSON")->required();
  pl->add_option("--threshold", pl_opts.reference.confidence_threshold, "Hilum confidence threshold")
      ->check(CLI::Range(0.0, 1.0));
  pl->add_option("--offset-mm", pl_opts.reference.carina_offset_mm, "Carina offset in mm")
      ->check(CLI::NonNegativeNumber);
  pl->add_option("--keep", pl_opts.ensemble.keep_components, "Connected components to keep")
      ->check(CLI::PositiveNumber);
  pl->add_option("--crop-border", pl_opts.quantify.crop_border, "Background crop in pixels")
      ->check(CLI::NonNegativeNumber);

  // eval-seg
  auto* es = app.add_subcommand("eval-seg", "Dice table of single models vs the ensemble");
  std::vector<std::string> es_models;
  std::string es_ensemble, es_gt, es_out;
  es->add_option("--model", es_models, "name=dir for each single model")->required();
  es->add_option("--ensemble", es_ensemble, "Ensemble mask directory")->required();
  es->add_option("--gt", es_gt, "Ground-truth mask directory")->required();
  es->add_option("--out", es_out, "CSV output (default: stdout)");

  // eval-det
  auto* ed = app.add_subcommand("eval-det", "Average precision of landmark detections");
  std::string ed_pred, ed_gt, ed_out;
  double ed_iou = 0.5;
  ed->add_option("--pred", ed_pred, "Predicted detections JSONL")->required();
  ed->add_option("--gt", ed_gt, "Ground-truth boxes JSONL")->required();
  ed->add_option("--iou", ed_iou, "IoU match threshold")->check(CLI::Range(0.0, 1.0));
  ed->add_option("--out", ed_out, "JSON report output");

  // correlate
  auto* co = app.add_subcommand("correlate", "Pearson correlation of region means with RALE scores");
  std::string co_stats, co_rale;
  bool co_filter = false;
  co->add_option("--stats", co_stats, "region_stats.csv")->required();
  co->add_option("--rale", co_rale, "RALE scores CSV")->required();
  co->add_flag("--filter-positive", co_filter, "Drop images whose total RALE score is 0");

  // synth
  auto* sy = app.add_subcommand("synth", "Generate synthetic phantoms with ground truth");
  std::string sy_spec;
  sy->add_option("--spec", sy_spec, "Synth spec JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ens) {
      std::vector<BinaryMask> masks;
      for (const auto& p : ens_masks) masks.push_back(load_mask(p));
      auto fused = majority_vote(masks);
      if (!ens_raw) fused = postprocess(fused, EnsembleConfig{ens_keep});
      save_mask(fused, ens_out);
      std::cout << "fused " << masks.size() << " masks -> " << ens_out << " (" << fused.count()
                << " lung pixels)\n";
    } else if (*lm) {
      SpacingResolution spacing;
      std::optional<int> height = lm_height;
      if (!lm_image.empty()) {
        spacing = resolve_spacing(lm_image, g.spacing_mm);
        if (!height) height = load_image(lm_image, spacing.spacing_mm).height();
      } else if (g.spacing_mm) {
        spacing = {*g.spacing_mm, SpacingSource::Explicit};
      }
      warn_default_spacing(spacing);
      const auto all = read_detections_jsonl(lm_dets);
      const auto dets = detections_for(all, lm_id);
      const auto ref = select_reference_point(dets, spacing.spacing_mm, lm_cfg, height);
      nlohmann::json j = {{"image_id", lm_id},
                          {"x", ref.point.x},
                          {"y", ref.point.y},
                          {"source", reference_source_name(ref.source)},
                          {"spacing_mm", spacing.spacing_mm}};
      if (ref.hilum_confidence) j["hilum_confidence"] = *ref.hilum_confidence;
      if (ref.carina_confidence) j["carina_confidence"] = *ref.carina_confidence;
      std::cout << j.dump() << "\n";
    } else if (*sp) {
      const auto mask = load_mask(sp_mask);
      const auto lungs = split_left_right(mask, sp_ref_x);
      const auto regions = split_four_regions(lungs.right, lungs.left, {sp_ref_x.value_or(0), sp_ref_y});
      save_region_mask(regions, sp_out);
      if (!sp_right.empty()) save_mask(lungs.right, sp_right);
      if (!sp_left.empty()) save_mask(lungs.left, sp_left);
      const auto areas = region_areas(regions, 1.0);
      for (Region r : kLungRegions) {
        std::cout << region_name(r) << " " << areas[region_index(r)].pixels << "\n";
      }
    } else if (*qt) {
      const auto spacing = resolve_spacing(qt_image, g.spacing_mm);
      const auto image = load_image(qt_image, spacing.spacing_mm);
      const auto stats = normalize_and_quantify(qt_id, image, load_mask(qt_lung),
                                                load_region_mask(qt_regions), qt_opts);
      const std::vector<RegionStats> rows{stats};
      if (qt_out.empty()) {
        write_stats_csv(std::cout, rows);
      } else {
        std::ofstream out(qt_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + qt_out);
        write_stats_csv(out, rows);
      }
    } else if (*pl) {
      const auto manifest = read_manifest(pl_manifest);
      pl_opts.spacing_mm = g.spacing_mm;
      pl_opts.jobs = g.jobs;
      if (g.out_dir) pl_opts.out_dir = fs::path(*g.out_dir);
      const auto run = run_pipeline(manifest, pl_opts, &std::cerr);
      std::cout << "wrote " << (run.out_dir / kStatsCsvName).string() << "\n";
      return run.exit_code;
    } else if (*es) {
      std::vector<NamedDir> models;
      for (const auto& m : es_models) {
        const auto eq = m.find('=');
        if (eq == std::string::npos) {
          models.push_back({fs::path(m).filename().string(), m});
        } else {
          models.push_back({m.substr(0, eq), m.substr(eq + 1)});
        }
      }
      const auto ev = evaluate_segmentation(models, {"Ensemble", es_ensemble}, es_gt);
      write_seg_table_csv(ev, std::cout);
      if (!es_out.empty()) {
        std::ofstream out(es_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + es_out);
        write_seg_table_csv(ev, out);
      }
    } else if (*ed) {
      const auto ev = evaluate_detection_files(ed_pred, ed_gt, ed_iou);
      for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& [cls, ap] : ev.per_class) {
        std::cout << landmark_name(cls) << " AP " << (ap ? format_fixed(*ap, 3) : "n/a") << "\n";
      }
      std::cout << "mAP " << format_fixed(ev.mean_ap, 3) << "\n";
      const auto report = detection_report_json(ev) + "\n";
      const fs::path out = !ed_out.empty()  ? fs::path(ed_out)
                           : g.out_dir      ? fs::path(*g.out_dir) / "detection_report.json"
                                            : fs::path();
      if (!out.empty()) {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw IoError("cannot write " + out.string());
        f << report;
      }
    } else if (*co) {
      const auto out_dir = require_out_dir(g, "correlate");
      const auto run = run_correlate(co_stats, co_rale, co_filter, out_dir);
      for (const auto& c : run.cells) {
        std::cout << region_name(c.region) << " " << score_kind_name(c.score_kind) << " n=" << c.n;
        if (c.r) {
          std::cout << " r=" << format_fixed(*c.r, 3) << " p=" << format_real(*c.p_value);
        } else {
          std::cout << " error=\"" << c.error << "\"";
        }
        std::cout << "\n";
      }
    } else if (*sy) {
      const auto out_dir = require_out_dir(g, "synth");
      const auto cfg = read_synth_config(sy_spec, g.seed);
      const auto run = write_synth_dataset(cfg, out_dir);
      std::cout << "generated " << run.image_ids.size() << " phantoms; manifest "
                << run.manifest.string() << "\n";
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
