#pragma once

#include <map>
#include <span>
#include <vector>

#include "sfmseg/colmap_model.hpp"
#include "sfmseg/masks.hpp"

namespace sfmseg {

/// Sorted, duplicate-free list of 3D point ids.
using IdSet = std::vector<Point3DId>;

/// The 3D support of one mask: ids of every 3D point whose track passes
/// through a keypoint lying inside the mask. `keypoint_count` also counts
/// keypoints without a 3D link.
struct SegmentSupport {
  MaskRef mask_ref;
  IdSet point_ids;
  std::int32_t keypoint_count = 0;
};

/// A cluster of masks plus the union of their 3D supports.
struct BuildingInstance {
  std::int32_t instance_id = 0;
  std::vector<MaskRef> members;  // sorted ascending
  IdSet points;
};

struct AssociationConfig {
  double tau_j = 0.20;   // mask-to-group Jaccard threshold
  double tau_m = 0.15;   // instance-merge threshold
  std::int32_t n_min = 10;  // instances with |points| <= n_min are discarded
};

/// Throws ValidationError unless 0 < tau_j <= 1, 0 < tau_m <= 1, n_min >= 0.
void validate_config(const AssociationConfig& config);

struct AssociationResult {
  std::vector<BuildingInstance> instances;
  std::map<Point3DId, std::int32_t> point_labels;
  std::vector<MaskRef> unassigned_masks;
};

std::size_t intersection_size(std::span<const Point3DId> a,
                              std::span<const Point3DId> b);
IdSet set_union(std::span<const Point3DId> a, std::span<const Point3DId> b);

/// |a n b| / |a u b| over sorted id sets; defined as 0 when both are empty.
double jaccard(std::span<const Point3DId> a, std::span<const Point3DId> b);

/// One support per mask, ordered by (image_id, mask_id) ascending. Masks on
/// images absent from the reconstruction get empty supports. `threads` > 1
/// splits the work per image; the output is identical for any thread count.
std::vector<SegmentSupport> build_supports(const Reconstruction& recon,
                                           const DetectionSet& dets,
                                           int threads = 1);

/// Greedy seeded clustering. Seeds are chosen by largest |point_ids| (ties:
/// lowest mask_ref); each instance then absorbs, over repeated passes in
/// mask_ref order, every unassigned mask whose Jaccard against the current
/// group set reaches tau_j, growing the set after each merge, until a full
/// pass changes nothing. Masks with empty supports are never clustered.
/// Output is invariant under permutation of the input list.
std::vector<BuildingInstance> cluster_masks(
    const std::vector<SegmentSupport>& supports, double tau_j);

/// Pairwise instance merging to fixpoint: scan pairs in ascending position
/// order, merge the first pair whose point-set Jaccard reaches tau_m,
/// restart, stop when a full scan triggers nothing. Ids are reassigned
/// 0..n-1 by descending |points| (stable) after convergence.
std::vector<BuildingInstance> merge_instances(
    std::vector<BuildingInstance> instances, double tau_m);

/// Drops instances with |points| <= n_min (their masks become unassigned)
/// and labels every remaining 3D point with the instance whose member masks
/// support it most often; ties go to the lowest instance_id.
AssociationResult filter_and_label(std::vector<BuildingInstance> instances,
                                   const std::vector<SegmentSupport>& supports,
                                   std::int32_t n_min);

/// Full pipeline: build_supports -> cluster_masks -> merge_instances ->
/// filter_and_label. Deterministic for fixed inputs, config and any thread
/// count.
AssociationResult associate(const Reconstruction& recon,
                            const DetectionSet& dets,
                            const AssociationConfig& config, int threads = 1);

}  // namespace sfmseg
