#include "sfmseg/baseline_tracker.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

// Foreground runs as [start, end) flat intervals.
std::vector<std::pair<std::int64_t, std::int64_t>> fg_intervals(
    const InstanceMask& m) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < m.rle.size(); ++i) {
    const std::int64_t run = m.rle[i];
    if (i % 2 == 1 && run > 0) out.emplace_back(pos, pos + run);
    pos += run;
  }
  return out;
}

std::int64_t interval_intersection(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& a,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& b) {
  std::int64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const std::int64_t lo = std::max(a[i].first, b[j].first);
    const std::int64_t hi = std::min(a[i].second, b[j].second);
    if (lo < hi) total += hi - lo;
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

}  // namespace

double mask_iou(const InstanceMask& a, const InstanceMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("mask dimensions differ: " + std::to_string(a.width) +
                         "x" + std::to_string(a.height) + " vs " +
                         std::to_string(b.width) + "x" +
                         std::to_string(b.height));
  }
  const std::int64_t inter = interval_intersection(fg_intervals(a), fg_intervals(b));
  const std::int64_t uni = a.foreground + b.foreground - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Track2D> track_iou(const std::vector<FrameInput>& frames,
                               double tau_iou) {
  if (!(tau_iou > 0.0 && tau_iou <= 1.0)) {
    throw ValidationError("tau_iou must lie in (0,1]");
  }

  std::vector<Track2D> tracks;
  // Track index owning each mask of the previous frame.
  std::vector<std::size_t> prev_owner;

  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& frame = frames[fi];
    std::vector<std::size_t> cur_owner(frame.masks.size(),
                                       std::numeric_limits<std::size_t>::max());

    if (fi > 0) {
      const auto& prev = frames[fi - 1];
      struct Candidate {
        double iou;
        std::size_t pi, ci;
        MaskRef prev_ref, cur_ref;
      };
      std::vector<Candidate> cands;
      for (std::size_t pi = 0; pi < prev.masks.size(); ++pi) {
        for (std::size_t ci = 0; ci < frame.masks.size(); ++ci) {
          const double iou = mask_iou(prev.masks[pi], frame.masks[ci]);
          if (iou >= tau_iou) {
            cands.push_back(Candidate{iou, pi, ci, prev.masks[pi].ref(),
                                      frame.masks[ci].ref()});
          }
        }
      }
      std::sort(cands.begin(), cands.end(),
                [](const Candidate& a, const Candidate& b) {
                  if (a.iou != b.iou) return a.iou > b.iou;
                  return std::tie(a.prev_ref, a.cur_ref) <
                         std::tie(b.prev_ref, b.cur_ref);
                });
      std::vector<bool> prev_used(prev.masks.size(), false);
      std::vector<bool> cur_used(frame.masks.size(), false);
      for (const auto& cand : cands) {
        if (prev_used[cand.pi] || cur_used[cand.ci]) continue;
        prev_used[cand.pi] = true;
        cur_used[cand.ci] = true;
        const std::size_t track_idx = prev_owner[cand.pi];
        tracks[track_idx].entries.push_back(
            TrackEntry2D{frame.frame_index, cand.cur_ref});
        cur_owner[cand.ci] = track_idx;
      }
    }

    for (std::size_t ci = 0; ci < frame.masks.size(); ++ci) {
      if (cur_owner[ci] != std::numeric_limits<std::size_t>::max()) continue;
      Track2D track;
      track.track_id = static_cast<std::int32_t>(tracks.size());
      track.entries.push_back(
          TrackEntry2D{frame.frame_index, frame.masks[ci].ref()});
      cur_owner[ci] = tracks.size();
      tracks.push_back(std::move(track));
    }
    prev_owner = std::move(cur_owner);
  }
  return tracks;
}

std::vector<Track2D> track_sequences(
    const std::vector<std::vector<FrameInput>>& sequences, double tau_iou) {
  std::vector<Track2D> all;
  for (const auto& seq : sequences) {
    auto tracks = track_iou(seq, tau_iou);
    for (auto& track : tracks) {
      track.track_id = static_cast<std::int32_t>(all.size());
      all.push_back(std::move(track));
    }
  }
  return all;
}

}  // namespace sfmseg
