#include "lungseg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lungseg/error.hpp"
#include "lungseg/regions.hpp"
#include "lungseg/textio.hpp"

namespace lungseg {

using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (p.is_relative()) return p.generic_string();
  const auto rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string mask_file(const std::string& id) { return id + ".png"; }

json point_json(Point p) { return json{{"x", p.x}, {"y", p.y}}; }

json opt_real(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(jobs, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  const auto base = path.parent_path();
  RunManifest m;
  try {
    const json j = json::parse(in);
    m.out_dir = resolve(base, j.value("out_dir", std::string("run")));
    std::set<std::string> ids;
    for (const auto& e : j.at("images")) {
      ManifestEntry entry;
      entry.image_id = e.at("image_id").get<std::string>();
      if (!ids.insert(entry.image_id).second) {
        throw DataError("duplicate image_id in manifest: " + entry.image_id);
      }
      entry.image = resolve(base, e.at("image").get<std::string>());
      for (const auto& mk : e.at("masks")) entry.masks.push_back(resolve(base, mk.get<std::string>()));
      entry.detections = resolve(base, e.at("detections").get<std::string>());
      if (e.contains("spacing_mm") && !e["spacing_mm"].is_null()) {
        entry.spacing_mm = e["spacing_mm"].get<double>();
      }
      m.images.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError("invalid manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  const auto base = path.parent_path();
  json images = json::array();
  for (const auto& e : manifest.images) {
    json masks = json::array();
    for (const auto& mk : e.masks) masks.push_back(relative_to(mk, base));
    json item = {{"image_id", e.image_id},
                 {"image", relative_to(e.image, base)},
                 {"masks", masks},
                 {"detections", relative_to(e.detections, base)}};
    if (e.spacing_mm) item["spacing_mm"] = *e.spacing_mm;
    images.push_back(std::move(item));
  }
  const json j = {{"out_dir", relative_to(manifest.out_dir, base)}, {"images", images}};
  write_text(path, j.dump(2) + "\n");
}

ImageOutcome process_image(const ManifestEntry& entry, const PipelineOptions& opts,
                           const fs::path& out_dir) {
  ImageOutcome out;
  out.image_id = entry.image_id;
  json log = {{"image_id", entry.image_id}};
  try {
    out.spacing = resolve_spacing(entry.image, opts.spacing_mm ? opts.spacing_mm : entry.spacing_mm);
    log["spacing_mm"] = out.spacing.spacing_mm;
    log["spacing_source"] = spacing_source_name(out.spacing.source);
    if (out.spacing.source == SpacingSource::Default) {
      log["warning"] = "pixel spacing not given; using default " + format_real(kDefaultSpacingMm) +
                       " mm/px";
    }

    const auto image = load_image(entry.image, out.spacing.spacing_mm);
    if (entry.masks.empty()) throw DataError("no candidate masks");
    std::vector<BinaryMask> candidates;
    for (const auto& p : entry.masks) {
      candidates.push_back(load_mask(p));
      if (candidates.back().width() != image.width() ||
          candidates.back().height() != image.height()) {
        throw DataError("mask " + p.filename().string() + " does not match image dimensions");
      }
    }
    const auto fused = postprocess(majority_vote(candidates), opts.ensemble);

    const auto all = read_detections_jsonl(entry.detections);
    const auto dets = detections_for(all, entry.image_id);
    const auto ref =
        select_reference_point(dets, out.spacing.spacing_mm, opts.reference, image.height());
    out.reference = ref;
    log["source"] = reference_source_name(ref.source);
    log["reference"] = point_json(ref.point);
    log["hilum_confidence"] = opt_real(ref.hilum_confidence);
    log["carina_confidence"] = opt_real(ref.carina_confidence);

    const int fallback = ref.carina_center ? ref.carina_center->x : ref.point.x;
    const auto lungs = split_left_right(fused, fallback);
    const auto regions = split_four_regions(lungs.right, lungs.left, ref.point);
    out.stats = normalize_and_quantify(entry.image_id, image, fused, regions, opts.quantify);

    save_mask(fused, out_dir / "fused" / mask_file(entry.image_id));
    save_mask(lungs.right, out_dir / "right" / mask_file(entry.image_id));
    save_mask(lungs.left, out_dir / "left" / mask_file(entry.image_id));
    save_region_mask(regions, out_dir / "regions" / mask_file(entry.image_id));

    json areas = json::object();
    for (Region r : kLungRegions) areas[std::string(region_name(r))] = (*out.stats)[r].area_px;
    log["area_px"] = areas;
    log["background_mean"] = out.stats->background_mean;
    log["status"] = "ok";
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
    out.stats.reset();
    log["status"] = "error";
    log["error"] = out.error;
  }
  out.log_line = log.dump();
  return out;
}

PipelineRun run_pipeline(const RunManifest& manifest, const PipelineOptions& opts,
                         std::ostream* progress) {
  if (manifest.images.empty()) throw DataError("manifest lists no images");
  PipelineRun run;
  run.out_dir = opts.out_dir ? *opts.out_dir : manifest.out_dir;
  for (const char* sub : {"", "fused", "right", "left", "regions"}) ensure_dir(run.out_dir / sub);

  run.outcomes.resize(manifest.images.size());
  parallel_for(manifest.images.size(), opts.jobs, [&](std::size_t i) {
    run.outcomes[i] = process_image(manifest.images[i], opts, run.out_dir);
  });

  // Single writer, manifest order.
  std::ostringstream csv;
  std::ostringstream log;
  csv << kStatsCsvHeader << '\n';
  std::size_t ok = 0;
  for (const auto& o : run.outcomes) {
    log << o.log_line << '\n';
    if (progress) {
      *progress << "[pipeline] image_id=" << o.image_id
                << " status=" << (o.ok ? "ok" : "error");
      if (o.reference) {
        *progress << " source=" << reference_source_name(o.reference->source) << " ref=("
                  << o.reference->point.x << "," << o.reference->point.y << ")";
      }
      if (o.spacing.source == SpacingSource::Default) {
        *progress << " warning=default-spacing-" << format_real(kDefaultSpacingMm) << "mm";
      }
      if (!o.ok) *progress << " error=\"" << o.error << "\"";
      *progress << '\n';
    }
    if (!o.ok) continue;
    ++ok;
    write_stats_rows(csv, *o.stats);
  }
  write_text(run.out_dir / kStatsCsvName, csv.str());
  write_text(run.out_dir / kPipelineLogName, log.str());

  if (ok == run.outcomes.size()) {
    run.exit_code = kExitOk;
  } else if (ok > 0) {
    run.exit_code = kExitPartial;
  } else {
    run.exit_code = kExitData;
  }
  return run;
}

// --- eval-seg -------------------------------------------------------------

namespace {

std::vector<std::string> mask_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm" || ext == ".pnm") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

SegEvaluation evaluate_segmentation(std::span<const NamedDir> models, const NamedDir& ensemble,
                                    const fs::path& gt_dir) {
  SegEvaluation ev;
  ev.files = mask_files(gt_dir);
  if (ev.files.empty()) throw DataError("no ground-truth masks in " + gt_dir.string());
  std::vector<BinaryMask> gt;
  for (const auto& f : ev.files) gt.push_back(load_mask(gt_dir / f));

  auto score_dir = [&](const NamedDir& nd) {
    if (mask_files(nd.dir) != ev.files) {
      throw DataError("file set of " + nd.name + " (" + nd.dir.string() +
                      ") does not match ground truth");
    }
    SegModelRow row;
    row.name = nd.name;
    for (std::size_t i = 0; i < ev.files.size(); ++i) {
      row.dice.push_back(dice(load_mask(nd.dir / ev.files[i]), gt[i]));
    }
    row.summary = mean_std(row.dice);
    return row;
  };

  for (const auto& m : models) ev.rows.push_back(score_dir(m));
  auto ens = score_dir(ensemble);
  for (auto& row : ev.rows) {
    row.vs_ensemble = ev.files.size() >= 2 ? std::optional(paired_t_test(ens.dice, row.dice))
                                           : std::nullopt;
  }
  ev.rows.push_back(std::move(ens));
  return ev;
}

void write_seg_table_csv(const SegEvaluation& ev, std::ostream& out) {
  out << "no,model,dice_mean,dice_std,p_value,summary\n";
  std::size_t no = 1;
  for (const auto& row : ev.rows) {
    std::string summary =
        format_fixed(row.summary.mean, 3) + " ± " + format_fixed(row.summary.std, 3);
    std::string p;
    if (row.vs_ensemble) {
      p = format_real(row.vs_ensemble->p_value);
      if (row.vs_ensemble->significant()) summary += "*";
    }
    out << no++ << ',' << row.name << ',' << format_real(row.summary.mean) << ','
        << format_real(row.summary.std) << ',' << p << ',' << summary << '\n';
  }
}

// --- eval-det -------------------------------------------------------------

DetectionEvaluation evaluate_detection_files(const fs::path& predictions,
                                             const fs::path& ground_truth, double iou_threshold) {
  const auto preds = read_detections_jsonl(predictions);
  const auto gt = to_ground_truth(read_detections_jsonl(ground_truth, false));
  if (gt.empty()) throw DataError("ground truth file is empty: " + ground_truth.string());
  return mean_average_precision(preds, gt, iou_threshold);
}

std::string detection_report_json(const DetectionEvaluation& ev) {
  json classes = json::object();
  for (const auto& [cls, ap] : ev.per_class) classes[std::string(landmark_name(cls))] = opt_real(ap);
  const json j = {{"iou_threshold", ev.iou_threshold},
                  {"average_precision", classes},
                  {"mAP", ev.mean_ap},
                  {"warnings", ev.warnings}};
  return j.dump(2);
}

// --- correlate ------------------------------------------------------------

std::string correlation_report_json(std::span<const CorrelationResult> cells) {
  json arr = json::array();
  for (const auto& c : cells) {
    json item = {{"region", region_name(c.region)},
                 {"score_kind", score_kind_name(c.score_kind)},
                 {"r", opt_real(c.r)},
                 {"p", opt_real(c.p_value)},
                 {"n", c.n}};
    if (!c.error.empty()) item["error"] = c.error;
    arr.push_back(std::move(item));
  }
  return arr.dump(2);
}

CorrelateRun run_correlate(const fs::path& stats_csv, const fs::path& rale_csv,
                           bool filter_positive_total, const fs::path& out_dir) {
  const auto stats = read_stats_csv(stats_csv);
  const auto scores = read_rale_csv(rale_csv);
  CorrelateRun run;
  run.cells = correlate_rale(stats, scores, filter_positive_total);
  if (std::none_of(run.cells.begin(), run.cells.end(), [](const auto& c) { return c.n >= 3; })) {
    throw DataError("fewer than 3 joined samples in every region/score cell");
  }
  run.bins = boxplot_bins(join_stats_rale(stats, scores, filter_positive_total));

  ensure_dir(out_dir);
  write_text(out_dir / "correlation.json", correlation_report_json(run.cells) + "\n");
  for (Region r : kLungRegions) {
    std::ostringstream csv;
    csv << "score_kind,score,n,min,q1,median,q3,max\n";
    for (const auto& b : run.bins) {
      if (b.region != r) continue;
      csv << score_kind_name(b.score_kind) << ',' << b.score << ',' << b.n << ','
          << format_real(b.min) << ',' << format_real(b.q1) << ',' << format_real(b.median) << ','
          << format_real(b.q3) << ',' << format_real(b.max) << '\n';
    }
    write_text(out_dir / ("boxplot_" + std::string(region_name(r)) + ".csv"), csv.str());
  }
  return run;
}

// --- synth ----------------------------------------------------------------

SynthRun write_synth_dataset(const SynthConfig& cfg, const fs::path& out_dir, bool keep_truth) {
  const std::size_t n_models = cfg.corruption_rates.size();
  ensure_dir(out_dir);
  for (const char* sub : {"images", "gt", "gt_regions"}) ensure_dir(out_dir / sub);
  for (std::size_t k = 1; k <= n_models; ++k) ensure_dir(out_dir / ("model" + std::to_string(k)));

  std::set<std::string> ids;
  for (const auto& s : cfg.phantoms) {
    if (!ids.insert(s.image_id).second) throw DataError("duplicate phantom image_id " + s.image_id);
  }

  const std::size_t n = cfg.phantoms.size();
  std::vector<PhantomTruth> truths;
  truths.reserve(n);
  for (const auto& s : cfg.phantoms) truths.push_back(generate_phantom(s));

  parallel_for(n, 0, [&](std::size_t i) {
    const auto& spec = cfg.phantoms[i];
    const auto& t = truths[i];
    const auto file = mask_file(spec.image_id);
    save_image(t.image, out_dir / "images" / file);
    write_spacing_sidecar(out_dir / "images" / file, spec.spacing_mm);
    save_mask(t.lung_mask, out_dir / "gt" / file);
    save_region_mask(t.region_mask, out_dir / "gt_regions" / file);
    const auto candidates = generate_candidate_masks(t.lung_mask, cfg.corruption_rates, spec.seed);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      save_mask(candidates[k], out_dir / ("model" + std::to_string(k + 1)) / file);
    }
  });

  SynthRun run;
  std::vector<TaggedDetection> dets;
  std::vector<TaggedDetection> gt_dets;
  std::vector<RaleRecord> rale;
  RunManifest manifest;
  manifest.out_dir = "run";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = cfg.phantoms[i];
    const auto& t = truths[i];
    for (const auto& d : t.detections) {
      dets.push_back({spec.image_id, d});
      gt_dets.push_back({spec.image_id, {d.landmark, d.box, 1.0}});
    }
    rale.insert(rale.end(), t.rale.begin(), t.rale.end());
    ManifestEntry e;
    e.image_id = spec.image_id;
    e.image = fs::path("images") / mask_file(spec.image_id);
    for (std::size_t k = 1; k <= n_models; ++k) {
      e.masks.push_back(fs::path("model" + std::to_string(k)) / mask_file(spec.image_id));
    }
    e.detections = "detections.jsonl";
    manifest.images.push_back(std::move(e));
    run.image_ids.push_back(spec.image_id);
  }
  write_detections_jsonl(dets, out_dir / "detections.jsonl");
  write_detections_jsonl(gt_dets, out_dir / "gt_detections.jsonl");
  write_rale_csv(rale, out_dir / "rale.csv");
  run.manifest = out_dir / "manifest.json";
  write_manifest(manifest, run.manifest);
  if (keep_truth) run.truths = std::move(truths);
  return run;
}

}  // namespace lungseg
