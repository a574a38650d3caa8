#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfmseg/colmap_model.hpp"
#include "sfmseg/evaluation.hpp"
#include "sfmseg/masks.hpp"

namespace sfmseg {

enum class MaskMode {
  kBboxHull,           // box over the building's projected keypoints
  kPerBuildingRegion,  // box over the building's projected 3D extent
};

/// Parameters of a generated street scene: disjoint building point clusters
/// along a straight street, camera sequences sweeping past them, one mask
/// per fully visible building per frame.
struct SceneSpec {
  std::int32_t num_buildings = 5;
  std::int32_t points_per_building = 200;
  std::int32_t num_frames = 20;
  std::int32_t num_sequences = 2;
  std::int32_t image_width = 1280;
  std::int32_t image_height = 960;
  double keypoint_noise_sigma = 0.0;  // pixels
  double track_dropout = 0.0;    // P(observation loses its 3D link)
  double wrong_track_rate = 0.0; // P(link rewired to another building)
  MaskMode mask_mode = MaskMode::kBboxHull;
  std::uint64_t rng_seed = 1;

  // When set, the chosen building is observed as two view groups (first and
  // second half of the sequences) that see overlapping point slabs instead
  // of the whole building, so its masks form two clusters that only the
  // instance-merge stage can unify.
  std::optional<std::int32_t> split_building;
  double split_group_fraction = 0.65;  // slab size per group
};

struct SceneTruth {
  std::map<Point3DId, std::int32_t> point_to_building;
  std::map<MaskRef, std::int32_t> mask_to_building;
  std::int32_t num_buildings = 0;
};

struct Scene {
  Reconstruction recon;
  DetectionSet dets;
  std::vector<GtBox> gt;
  SceneTruth truth;
  std::vector<std::vector<std::string>> sequences;  // image names per sequence
};

/// Deterministic for a fixed spec (including rng_seed). Throws
/// GenerationError on degenerate specs (non-positive counts, probabilities
/// outside [0,1], a building never fully visible, ...).
Scene generate_scene(const SceneSpec& spec);

/// Writes `images.txt` and `points3D.txt` in COLMAP text format such that
/// parse_model reads the reconstruction back equal. Writing is idempotent
/// byte-for-byte.
void write_model(const Reconstruction& recon,
                 const std::filesystem::path& dir);

/// Writes the whole scene under `out_dir`: model/ (COLMAP text plus a
/// cameras.txt stub), detections.json, gt.csv, truth.json and order.txt
/// (one image name per line, blank line between sequences).
void write_scene(const Scene& scene, const SceneSpec& spec,
                 const std::filesystem::path& out_dir);

/// Key = value scene description (# comments allowed). Unknown keys are
/// errors. See the repository README for the key list.
SceneSpec load_scene_spec(const std::filesystem::path& path);

}  // namespace sfmseg
