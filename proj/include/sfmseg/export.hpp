#pragma once

#include <filesystem>

#include "sfmseg/association.hpp"
#include "sfmseg/colmap_model.hpp"
#include "sfmseg/masks.hpp"

namespace sfmseg {

enum class ColorMode {
  kInstancePalette,  // deterministic distinct color per instance id
  kOriginalRgb,      // keep reconstructed colors, ids still written
  kSingleInstance,   // highlight one instance in red, others keep color
};

/// ASCII PLY with per-vertex x,y,z (float), red,green,blue (uchar) and
/// instance_id (int). Every reconstruction point appears exactly once, in
/// ascending id order; unlabeled points get instance_id -1 (mid-gray in
/// palette mode). Throws ValidationError when `single_instance_id` names no
/// instance in the result.
void export_ply(const Reconstruction& recon, const AssociationResult& result,
                const std::filesystem::path& path, ColorMode mode,
                std::int32_t single_instance_id = -1);

/// Per-instance overlay data: JSON listing (image name, mask_id, bounding
/// box) per member mask, ordered by image name; unassigned masks appear
/// under a reserved "unassigned" key.
void export_tracks(const AssociationResult& result, const DetectionSet& dets,
                   const std::filesystem::path& path);

/// Palette color for an instance id (pure function of the id).
std::array<std::uint8_t, 3> palette_color(std::int32_t instance_id);

}  // namespace sfmseg
