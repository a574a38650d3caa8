#include "sfmseg/association.hpp"

#include <algorithm>
#include <future>
#include <unordered_map>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

std::vector<SegmentSupport> supports_for_entry(const Reconstruction& recon,
                                               const ImageDetections& entry) {
  std::vector<SegmentSupport> out;
  out.reserve(entry.masks.size());
  for (const auto& mask : entry.masks) {
    out.push_back(SegmentSupport{mask.ref(), {}, 0});
  }
  if (!entry.in_reconstruction) return out;

  const auto img_it = recon.images.find(entry.image_id);
  if (img_it == recon.images.end()) return out;

  std::vector<std::vector<Point3DId>> raw(entry.masks.size());
  for (const auto& kp : img_it->second.keypoints) {
    for (std::size_t mi = 0; mi < entry.masks.size(); ++mi) {
      if (contains(entry.masks[mi], kp.x, kp.y)) {
        ++out[mi].keypoint_count;
        if (kp.point3d_id) raw[mi].push_back(*kp.point3d_id);
      }
    }
  }
  for (std::size_t mi = 0; mi < raw.size(); ++mi) {
    auto& ids = raw[mi];
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    out[mi].point_ids = std::move(ids);
  }
  return out;
}

BuildingInstance merge_two(const BuildingInstance& a, const BuildingInstance& b) {
  BuildingInstance merged;
  merged.instance_id = a.instance_id;
  merged.members.resize(a.members.size() + b.members.size());
  std::merge(a.members.begin(), a.members.end(), b.members.begin(),
             b.members.end(), merged.members.begin());
  merged.points = set_union(a.points, b.points);
  return merged;
}

}  // namespace

void validate_config(const AssociationConfig& config) {
  if (!(config.tau_j > 0.0 && config.tau_j <= 1.0)) {
    throw ValidationError("tau_j must lie in (0,1]");
  }
  if (!(config.tau_m > 0.0 && config.tau_m <= 1.0)) {
    throw ValidationError("tau_m must lie in (0,1]");
  }
  if (config.n_min < 0) {
    throw ValidationError("n_min must be nonnegative");
  }
}

std::size_t intersection_size(std::span<const Point3DId> a,
                              std::span<const Point3DId> b) {
  std::size_t n = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

IdSet set_union(std::span<const Point3DId> a, std::span<const Point3DId> b) {
  IdSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

double jaccard(std::span<const Point3DId> a, std::span<const Point3DId> b) {
  if (a.empty() && b.empty()) return 0.0;
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<SegmentSupport> build_supports(const Reconstruction& recon,
                                           const DetectionSet& dets,
                                           int threads) {
  // Canonical order: ascending image_id (synthetic negative ids first).
  std::vector<const ImageDetections*> entries;
  entries.reserve(dets.images.size());
  for (const auto& [id, idx] : dets.by_id) {
    entries.push_back(&dets.images[idx]);
  }

  std::vector<SegmentSupport> supports;
  if (threads <= 1 || entries.size() < 2) {
    for (const auto* entry : entries) {
      auto part = supports_for_entry(recon, *entry);
      supports.insert(supports.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
    }
    return supports;
  }

  const std::size_t n = entries.size();
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::future<std::vector<SegmentSupport>>> futures;
  futures.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = n * c / chunks;
    const std::size_t hi = n * (c + 1) / chunks;
    futures.push_back(std::async(std::launch::async, [&recon, &entries, lo, hi] {
      std::vector<SegmentSupport> part;
      for (std::size_t i = lo; i < hi; ++i) {
        auto one = supports_for_entry(recon, *entries[i]);
        part.insert(part.end(), std::make_move_iterator(one.begin()),
                    std::make_move_iterator(one.end()));
      }
      return part;
    }));
  }
  for (auto& f : futures) {
    auto part = f.get();
    supports.insert(supports.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
  }
  return supports;
}

std::vector<BuildingInstance> cluster_masks(
    const std::vector<SegmentSupport>& supports, double tau_j) {
  if (!(tau_j > 0.0 && tau_j <= 1.0)) {
    throw ValidationError("tau_j must lie in (0,1]");
  }

  // Canonical scan order regardless of input permutation.
  std::vector<std::size_t> order(supports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&supports](std::size_t a, std::size_t b) {
    return supports[a].mask_ref < supports[b].mask_ref;
  });

  std::vector<bool> assigned(supports.size(), false);
  std::vector<BuildingInstance> instances;

  for (;;) {
    // Seed: largest support among unassigned; ties fall to the lowest
    // mask_ref because the scan respects the canonical order.
    std::size_t seed = supports.size();
    std::size_t seed_size = 0;
    for (const std::size_t idx : order) {
      if (assigned[idx] || supports[idx].point_ids.empty()) continue;
      if (seed == supports.size() || supports[idx].point_ids.size() > seed_size) {
        seed = idx;
        seed_size = supports[idx].point_ids.size();
      }
    }
    if (seed == supports.size()) break;

    BuildingInstance inst;
    inst.instance_id = static_cast<std::int32_t>(instances.size());
    inst.members.push_back(supports[seed].mask_ref);
    inst.points = supports[seed].point_ids;
    assigned[seed] = true;

    bool changed = true;
    while (changed) {
      changed = false;
      for (const std::size_t idx : order) {
        if (assigned[idx] || supports[idx].point_ids.empty()) continue;
        if (jaccard(supports[idx].point_ids, inst.points) >= tau_j) {
          assigned[idx] = true;
          inst.members.push_back(supports[idx].mask_ref);
          inst.points = set_union(inst.points, supports[idx].point_ids);
          changed = true;
        }
      }
    }
    std::sort(inst.members.begin(), inst.members.end());
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<BuildingInstance> merge_instances(
    std::vector<BuildingInstance> instances, double tau_m) {
  if (!(tau_m > 0.0 && tau_m <= 1.0)) {
    throw ValidationError("tau_m must lie in (0,1]");
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < instances.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < instances.size(); ++j) {
        if (jaccard(instances[i].points, instances[j].points) >= tau_m) {
          instances[i] = merge_two(instances[i], instances[j]);
          instances.erase(instances.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
          break;  // restart the pair scan
        }
      }
    }
  }

  std::stable_sort(instances.begin(), instances.end(),
                   [](const BuildingInstance& a, const BuildingInstance& b) {
                     return a.points.size() > b.points.size();
                   });
  for (std::size_t i = 0; i < instances.size(); ++i) {
    instances[i].instance_id = static_cast<std::int32_t>(i);
  }
  return instances;
}

AssociationResult filter_and_label(std::vector<BuildingInstance> instances,
                                   const std::vector<SegmentSupport>& supports,
                                   std::int32_t n_min) {
  if (n_min < 0) {
    throw ValidationError("n_min must be nonnegative");
  }

  AssociationResult result;
  for (auto& inst : instances) {
    if (static_cast<std::int64_t>(inst.points.size()) <= n_min) continue;
    inst.instance_id = static_cast<std::int32_t>(result.instances.size());
    result.instances.push_back(std::move(inst));
  }

  std::map<MaskRef, const SegmentSupport*> by_ref;
  for (const auto& sup : supports) {
    by_ref.emplace(sup.mask_ref, &sup);
  }

  // Votes per point: how many member masks of each instance support it.
  std::unordered_map<Point3DId, std::map<std::int32_t, std::int32_t>> votes;
  for (const auto& inst : result.instances) {
    for (const auto& member : inst.members) {
      const auto it = by_ref.find(member);
      if (it == by_ref.end()) continue;
      for (const Point3DId pid : it->second->point_ids) {
        ++votes[pid][inst.instance_id];
      }
    }
  }
  for (const auto& [pid, counts] : votes) {
    std::int32_t best_id = -1;
    std::int32_t best_count = 0;
    for (const auto& [inst_id, count] : counts) {  // ascending instance_id
      if (count > best_count) {
        best_count = count;
        best_id = inst_id;
      }
    }
    result.point_labels.emplace(pid, best_id);
  }

  std::map<MaskRef, bool> assigned;
  for (const auto& inst : result.instances) {
    for (const auto& member : inst.members) assigned[member] = true;
  }
  for (const auto& sup : supports) {
    if (!assigned.count(sup.mask_ref)) {
      result.unassigned_masks.push_back(sup.mask_ref);
    }
  }
  std::sort(result.unassigned_masks.begin(), result.unassigned_masks.end());
  return result;
}

AssociationResult associate(const Reconstruction& recon,
                            const DetectionSet& dets,
                            const AssociationConfig& config, int threads) {
  validate_config(config);
  const auto supports = build_supports(recon, dets, threads);
  auto instances = cluster_masks(supports, config.tau_j);
  instances = merge_instances(std::move(instances), config.tau_m);
  return filter_and_label(std::move(instances), supports, config.n_min);
}

}  // namespace sfmseg
