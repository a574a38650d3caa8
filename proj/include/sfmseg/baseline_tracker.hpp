#pragma once

#include <span>
#include <vector>

#include "sfmseg/masks.hpp"

namespace sfmseg {

struct TrackEntry2D {
  std::int32_t frame_index = 0;
  MaskRef mask;

  auto operator<=>(const TrackEntry2D&) const = default;
};

/// A chain of masks linked frame-to-frame by 2D IoU.
struct Track2D {
  std::int32_t track_id = 0;
  std::vector<TrackEntry2D> entries;  // strictly increasing frame_index
};

struct FrameInput {
  std::int32_t frame_index = 0;
  std::span<const InstanceMask> masks;
};

/// Pixel IoU of two masks of identical dimensions; throws DimensionError on
/// a width/height mismatch.
double mask_iou(const InstanceMask& a, const InstanceMask& b);

/// Frame-to-previous-frame greedy matching: pairwise IoUs between
/// consecutive frames are accepted in descending order (ties by lower
/// (prev, cur) mask_ref pair) while both sides are unmatched and IoU >=
/// tau_iou. Unmatched masks start new tracks; a track that misses a frame
/// is closed. Every input mask ends up in exactly one track.
std::vector<Track2D> track_iou(const std::vector<FrameInput>& frames,
                               double tau_iou);

/// Runs track_iou independently per sequence and renumbers track ids
/// consecutively, so no track crosses a sequence boundary.
std::vector<Track2D> track_sequences(
    const std::vector<std::vector<FrameInput>>& sequences, double tau_iou);

}  // namespace sfmseg
