#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfmseg/colmap_model.hpp"

namespace sfmseg {

/// Axis-aligned box with inclusive pixel coordinates.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool operator==(const Box&) const = default;
};

struct MaskRef {
  ImageId image_id = 0;
  std::int32_t mask_id = 0;

  auto operator<=>(const MaskRef&) const = default;
};

/// One instance mask, stored as run-length counts over the row-major
/// flattening of the height x width grid. Runs alternate background /
/// foreground starting with background; a leading 0 means the mask starts
/// with foreground.
struct InstanceMask {
  ImageId image_id = 0;
  std::int32_t mask_id = 0;
  std::string label;
  double detection_score = 1.0;
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<std::int64_t> rle;

  // Derived at construction: inclusive prefix sums of rle, foreground pixel
  // count, and the tight foreground bounding box.
  std::vector<std::int64_t> run_ends;
  std::int64_t foreground = 0;
  Box bbox;

  MaskRef ref() const { return MaskRef{image_id, mask_id}; }
};

/// Validates the run encoding (coverage, at least one foreground pixel,
/// score in [0,1]) and fills the derived fields. Throws FormatError.
InstanceMask make_instance_mask(ImageId image_id, std::int32_t mask_id,
                                std::string label, double detection_score,
                                std::int32_t width, std::int32_t height,
                                std::vector<std::int64_t> rle);

/// True iff pixel (floor(x), floor(y)) is inside the image and foreground.
/// Out-of-bounds coordinates return false.
bool contains(const InstanceMask& mask, double x, double y);

/// Tight inclusive bounding box of the foreground.
Box bounding_box(const InstanceMask& mask);

/// Full row-major 0/1 expansion (test and tooling aid; prefer contains()).
std::vector<std::uint8_t> decode_mask(const InstanceMask& mask);

/// Canonical background-first run-length counts for a row-major 0/1 grid.
std::vector<std::int64_t> rle_encode(const std::vector<std::uint8_t>& grid);

/// Detections for one image. `in_reconstruction` is false when the image
/// name did not resolve against the model; such entries carry a synthetic
/// negative image_id so their masks stay addressable.
struct ImageDetections {
  std::string name;
  ImageId image_id = 0;
  bool in_reconstruction = true;
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<InstanceMask> masks;
};

struct DetectionSet {
  std::vector<ImageDetections> images;  // file order

  const ImageDetections* find_id(ImageId id) const;
  const ImageDetections* find_name(const std::string& name) const;
  const InstanceMask* find_mask(const MaskRef& ref) const;
  /// Name for an image id; throws FormatError for an unknown id.
  const std::string& image_name(ImageId id) const;
  std::size_t total_masks() const;

  std::map<ImageId, std::size_t> by_id;
  std::map<std::string, std::size_t> by_name;
};

/// Rebuilds the lookup indexes after direct edits to `images`.
void reindex(DetectionSet& dets);

/// Loads a detections JSON file, resolving image names against `recon`.
/// Masks scoring below `min_score` are dropped; surviving masks keep file
/// order and are renumbered 0..n-1 per image. When `label_filter` is set,
/// only masks with exactly that label are kept. Unresolvable image names are
/// retained as unmatched entries, not errors.
DetectionSet load_detections(const std::filesystem::path& path,
                             const Reconstruction& recon, double min_score,
                             const std::optional<std::string>& label_filter = {});

/// Standalone variant for purely 2D consumers (no reconstruction): image
/// ids are assigned by file order starting at 0.
DetectionSet load_detections(const std::filesystem::path& path,
                             double min_score,
                             const std::optional<std::string>& label_filter = {});

}  // namespace sfmseg
