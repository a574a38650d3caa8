#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfmseg/association.hpp"
#include "sfmseg/baseline_tracker.hpp"
#include "sfmseg/colmap_model.hpp"
#include "sfmseg/errors.hpp"
#include "sfmseg/evaluation.hpp"
#include "sfmseg/export.hpp"
#include "sfmseg/masks.hpp"
#include "sfmseg/result_io.hpp"
#include "sfmseg/synth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// SFMSEG_LOG = quiet | info | debug
int log_level() {
  static const int level = [] {
    const char* env = std::getenv("SFMSEG_LOG");
    if (env == nullptr) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

void warn_range(const std::string& name, double value, double lo, double hi) {
  if (value < lo || value > hi) {
    if (log_level() >= 1) {
      std::cerr << "warning: " << name << " = " << value
                << " is outside the recommended range [" << lo << ", " << hi
                << "]\n";
    }
  }
}

struct CommonOptions {
  double tau_j = 0.20;
  double tau_m = 0.15;
  std::int64_t n_min = 10;
  double min_score = 0.30;
  std::string label;
  double tau_iou = 0.5;
  double tau_eval = 0.5;
  std::int64_t seed = 1;
  int threads = 1;
  bool json = false;
};

std::optional<std::string> label_filter(const CommonOptions& opts) {
  if (opts.label.empty()) return std::nullopt;
  return opts.label;
}

void check_recommended(const CommonOptions& opts) {
  warn_range("tau-j", opts.tau_j, 0.15, 0.30);
  warn_range("tau-m", opts.tau_m, 0.10, 0.25);
  warn_range("n-min", static_cast<double>(opts.n_min), 5, 20);
  warn_range("min-score", opts.min_score, 0.2, 0.5);
}

ordered_json meta_block(const std::string& command, const CommonOptions& opts) {
  ordered_json meta;
  meta["command"] = command;
  if (command == "associate") {
    meta["tau_j"] = opts.tau_j;
    meta["tau_m"] = opts.tau_m;
    meta["n_min"] = opts.n_min;
  }
  if (command == "baseline") {
    meta["tau_iou"] = opts.tau_iou;
  }
  meta["min_score"] = opts.min_score;
  if (!opts.label.empty()) meta["label"] = opts.label;
  return meta;
}

int cmd_associate(const std::string& model_dir, const std::string& detections,
                  const std::string& out_dir, const CommonOptions& opts) {
  check_recommended(opts);
  const auto recon = sfmseg::parse_model(model_dir);
  log_debug("model: " + std::to_string(recon.images.size()) + " images, " +
            std::to_string(recon.points3d.size()) + " points");
  const auto dets =
      sfmseg::load_detections(detections, recon, opts.min_score, label_filter(opts));

  sfmseg::AssociationConfig config;
  config.tau_j = opts.tau_j;
  config.tau_m = opts.tau_m;
  config.n_min = static_cast<std::int32_t>(opts.n_min);
  const auto result = sfmseg::associate(recon, dets, config, opts.threads);

  fs::create_directories(out_dir);
  auto doc = sfmseg::make_document(result, dets);
  doc.meta = meta_block("associate", opts);
  sfmseg::save_document(doc, fs::path(out_dir) / "result.json");
  sfmseg::export_ply(recon, result, fs::path(out_dir) / "cloud.ply",
                     sfmseg::ColorMode::kInstancePalette);
  sfmseg::export_tracks(result, dets, fs::path(out_dir) / "tracks.json");

  std::size_t unmatched_images = 0;
  for (const auto& img : dets.images) {
    if (!img.in_reconstruction) ++unmatched_images;
  }

  if (opts.json) {
    ordered_json summary;
    summary["images"] = recon.images.size();
    summary["points"] = recon.points3d.size();
    summary["masks"] = dets.total_masks();
    summary["unmatched_images"] = unmatched_images;
    summary["instances"] = result.instances.size();
    summary["points_labeled"] = result.point_labels.size();
    summary["masks_unassigned"] = result.unassigned_masks.size();
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "instances: " << result.instances.size()
              << " | points labeled: " << result.point_labels.size() << "/"
              << recon.points3d.size()
              << " | masks unassigned: " << result.unassigned_masks.size()
              << "/" << dets.total_masks() << "\n"
              << "wrote " << out_dir << "/result.json, cloud.ply, tracks.json\n";
  }
  return 0;
}

std::vector<std::vector<std::string>> read_order_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sfmseg::IoError("cannot open " + path);
  std::vector<std::vector<std::string>> sequences(1);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = line;
    const auto b = t.find_first_not_of(" \t");
    t = b == std::string::npos ? "" : t.substr(b, t.find_last_not_of(" \t") - b + 1);
    if (t.empty()) {
      if (!sequences.back().empty()) sequences.emplace_back();
      continue;
    }
    if (t[0] == '#') continue;
    sequences.back().push_back(t);
  }
  if (sequences.back().empty()) sequences.pop_back();
  return sequences;
}

int cmd_baseline(const std::string& detections, const std::string& order,
                 const std::string& out_dir, const CommonOptions& opts) {
  const auto dets =
      sfmseg::load_detections(detections, opts.min_score, label_filter(opts));
  const auto sequences = read_order_file(order);

  std::vector<std::vector<sfmseg::FrameInput>> frames;
  std::int32_t frame_index = 0;
  for (const auto& seq : sequences) {
    frames.emplace_back();
    for (const auto& name : seq) {
      const sfmseg::ImageDetections* img = dets.find_name(name);
      if (img == nullptr) {
        log_info("warning: order file names '" + name +
                 "' which has no detections entry; treated as an empty frame");
        frames.back().push_back(sfmseg::FrameInput{frame_index++, {}});
        continue;
      }
      frames.back().push_back(sfmseg::FrameInput{
          frame_index++, std::span<const sfmseg::InstanceMask>(img->masks)});
    }
  }

  const auto tracks = sfmseg::track_sequences(frames, opts.tau_iou);

  fs::create_directories(out_dir);
  auto doc = sfmseg::make_document(tracks, dets);
  doc.meta = meta_block("baseline", opts);
  sfmseg::save_document(doc, fs::path(out_dir) / "result.json");

  if (opts.json) {
    ordered_json summary;
    summary["frames"] = frame_index;
    summary["sequences"] = sequences.size();
    summary["masks"] = dets.total_masks();
    summary["tracks"] = tracks.size();
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "tracks: " << tracks.size() << " over " << frame_index
              << " frames in " << sequences.size() << " sequences\n"
              << "wrote " << out_dir << "/result.json\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& predictions, const std::string& detections,
                 const std::string& gt_path, const std::string& out_dir,
                 const CommonOptions& opts, bool min_score_given,
                 bool label_given) {
  auto doc = sfmseg::load_document(predictions);

  // Reuse the producing run's filters so mask ids line up, unless overridden.
  double min_score = opts.min_score;
  std::optional<std::string> label = label_filter(opts);
  if (!min_score_given && doc.meta.contains("min_score")) {
    min_score = doc.meta["min_score"].get<double>();
    log_debug("using min_score " + std::to_string(min_score) +
              " from predictions meta");
  }
  if (!label_given && doc.meta.contains("label")) {
    label = doc.meta["label"].get<std::string>();
  }

  const auto dets = sfmseg::load_detections(detections, min_score, label);
  const auto gt = sfmseg::load_gt(gt_path);
  const auto report = sfmseg::evaluate(doc, dets, gt, opts.tau_eval);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    sfmseg::write_report_json(report, fs::path(out_dir) / "report.json");
    sfmseg::write_report_csv(report, fs::path(out_dir) / "report.csv");
  }

  if (opts.json) {
    ordered_json summary;
    summary["mean_coverage"] = report.mean_coverage;
    summary["mean_adjusted_coverage"] = report.mean_adjusted_coverage;
    summary["weighted_coverage"] = report.weighted_coverage;
    summary["weighted_adjusted_coverage"] = report.weighted_adjusted_coverage;
    summary["instances"] = report.per_instance.size();
    summary["warnings"] = report.warnings.size();
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << sfmseg::format_report_table(report);
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              const CommonOptions& opts, bool seed_given) {
  sfmseg::SceneSpec spec;
  if (!spec_path.empty()) {
    spec = sfmseg::load_scene_spec(spec_path);
  }
  if (seed_given) {
    spec.rng_seed = static_cast<std::uint64_t>(opts.seed);
  }
  const auto scene = sfmseg::generate_scene(spec);
  sfmseg::write_scene(scene, spec, out_dir);

  if (opts.json) {
    ordered_json summary;
    summary["buildings"] = spec.num_buildings;
    summary["frames"] = spec.num_frames;
    summary["sequences"] = spec.num_sequences;
    summary["points"] = scene.recon.points3d.size();
    summary["masks"] = scene.dets.total_masks();
    summary["gt_boxes"] = scene.gt.size();
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "scene: " << spec.num_buildings << " buildings, "
              << scene.recon.points3d.size() << " points, "
              << scene.dets.total_masks() << " masks over " << spec.num_frames
              << " frames\n"
              << "wrote model/, detections.json, gt.csv, truth.json, "
                 "order.txt under " << out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D instance masks -> 3D-consistent object instances over an "
               "SfM reconstruction"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value config file (flags override)");

  CommonOptions opts;
  const auto add_common = [&opts](CLI::App* cmd) {
    cmd->add_option("--tau-j", opts.tau_j, "mask-level Jaccard threshold");
    cmd->add_option("--tau-m", opts.tau_m, "instance-merge threshold");
    cmd->add_option("--n-min", opts.n_min, "minimum 3D points per instance");
    cmd->add_option("--min-score", opts.min_score, "detection score cutoff");
    cmd->add_option("--label", opts.label, "keep only masks with this label");
    cmd->add_option("--tau-iou", opts.tau_iou, "baseline 2D IoU threshold");
    cmd->add_option("--tau-eval", opts.tau_eval, "evaluation box-IoU threshold");
    cmd->add_option("--seed", opts.seed, "RNG seed override");
    cmd->add_option("--threads", opts.threads, "worker threads");
    cmd->add_flag("--json", opts.json, "machine-readable summary on stdout");
  };

  std::string model_dir, detections, out_dir, order, predictions, gt_path,
      spec_path, eval_out;

  CLI::App* associate = app.add_subcommand(
      "associate", "lift masks onto the 3D model and cluster them");
  associate->add_option("--model", model_dir, "COLMAP text model directory")
      ->required();
  associate->add_option("--detections", detections, "detections JSON")->required();
  associate->add_option("--out", out_dir, "output directory")->required();
  add_common(associate);

  CLI::App* baseline = app.add_subcommand(
      "baseline", "frame-to-frame 2D IoU tracker over the same detections");
  baseline->add_option("--detections", detections, "detections JSON")->required();
  baseline->add_option("--order", order,
                       "frame order file (one image name per line, blank "
                       "line = sequence boundary)")
      ->required();
  baseline->add_option("--out", out_dir, "output directory")->required();
  add_common(baseline);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "coverage metrics of a result against GT boxes");
  evaluate->add_option("--predictions", predictions, "result.json to score")
      ->required();
  evaluate->add_option("--detections", detections, "detections JSON")->required();
  evaluate->add_option("--gt", gt_path, "ground truth CSV")->required();
  evaluate->add_option("--out", eval_out, "report output directory");
  add_common(evaluate);

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic scene with known instance labels");
  synth->add_option("--spec", spec_path, "scene spec file (key = value)");
  synth->add_option("--out", out_dir, "output directory")->required();
  add_common(synth);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(associate)) {
      return cmd_associate(model_dir, detections, out_dir, opts);
    }
    if (app.got_subcommand(baseline)) {
      return cmd_baseline(detections, order, out_dir, opts);
    }
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(predictions, detections, gt_path, eval_out, opts,
                          evaluate->count("--min-score") > 0,
                          evaluate->count("--label") > 0);
    }
    if (app.got_subcommand(synth)) {
      return cmd_synth(spec_path, out_dir, opts, synth->count("--seed") > 0);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
