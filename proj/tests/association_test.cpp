#include "sfmseg/association.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sfmseg/errors.hpp"
#include "test_util.hpp"

using namespace sfmseg;

namespace {

IdSet ids(std::initializer_list<Point3DId> list) {
  IdSet out(list);
  std::sort(out.begin(), out.end());
  return out;
}

IdSet range_ids(Point3DId lo, Point3DId hi) {
  IdSet out;
  for (Point3DId v = lo; v <= hi; ++v) out.push_back(v);
  return out;
}

SegmentSupport sup(ImageId image, std::int32_t mask, IdSet points) {
  return SegmentSupport{MaskRef{image, mask}, std::move(points), 0};
}

}  // namespace

TEST(JaccardTest, Examples) {
  EXPECT_DOUBLE_EQ(jaccard(ids({1, 2, 3}), ids({1, 2, 3})), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(ids({1, 2}), ids({3, 4})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(ids({1, 2, 3, 4}), ids({3, 4, 5})), 0.4);
  EXPECT_DOUBLE_EQ(jaccard(ids({}), ids({})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(ids({}), ids({1})), 0.0);
}

TEST(JaccardTest, SymmetricAndBounded) {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 200; ++iter) {
    std::set<Point3DId> sa, sb;
    for (int k = 0; k < 12; ++k) {
      if (rng() % 2) sa.insert(static_cast<Point3DId>(rng() % 20));
      if (rng() % 2) sb.insert(static_cast<Point3DId>(rng() % 20));
    }
    const IdSet a(sa.begin(), sa.end()), b(sb.begin(), sb.end());
    const double j = jaccard(a, b);
    EXPECT_DOUBLE_EQ(j, jaccard(b, a));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
    EXPECT_EQ(j == 1.0, !a.empty() && a == b);
    const bool disjoint = intersection_size(a, b) == 0;
    EXPECT_EQ(j == 0.0, disjoint);
  }
}

TEST(BuildSupportsTest, MembershipAndKeypointCount) {
  // Three keypoints inside the mask carrying {7, none, 9}; one outside.
  const Reconstruction recon = testutil::make_recon(
      {{1,
        {{1.0, 1.0, 7}, {2.0, 2.0, std::nullopt}, {3.0, 3.0, 9}, {50.0, 50.0, 11}}}});
  DetectionSet dets = testutil::make_dets(
      {{"img1.png", 1, true, 10, 10,
        {testutil::mask_from_rect(1, 0, 10, 10, 0, 0, 4, 4)}}});

  const auto supports = build_supports(recon, dets);
  ASSERT_EQ(supports.size(), 1u);
  EXPECT_EQ(supports[0].mask_ref, (MaskRef{1, 0}));
  EXPECT_EQ(supports[0].point_ids, ids({7, 9}));
  EXPECT_EQ(supports[0].keypoint_count, 3);
}

TEST(BuildSupportsTest, MaskCoveringNothingIsEmpty) {
  const Reconstruction recon = testutil::make_recon({{1, {{9.0, 9.0, 7}}}});
  DetectionSet dets = testutil::make_dets(
      {{"img1.png", 1, true, 10, 10,
        {testutil::mask_from_rect(1, 0, 10, 10, 0, 0, 2, 2)}}});
  const auto supports = build_supports(recon, dets);
  ASSERT_EQ(supports.size(), 1u);
  EXPECT_TRUE(supports[0].point_ids.empty());
  EXPECT_EQ(supports[0].keypoint_count, 0);
}

TEST(BuildSupportsTest, OverlappingMasksShareKeypoints) {
  const Reconstruction recon = testutil::make_recon({{1, {{2.0, 2.0, 7}}}});
  DetectionSet dets = testutil::make_dets(
      {{"img1.png", 1, true, 10, 10,
        {testutil::mask_from_rect(1, 0, 10, 10, 0, 0, 4, 4),
         testutil::mask_from_rect(1, 1, 10, 10, 2, 2, 6, 6)}}});
  const auto supports = build_supports(recon, dets);
  ASSERT_EQ(supports.size(), 2u);
  EXPECT_EQ(supports[0].point_ids, ids({7}));
  EXPECT_EQ(supports[1].point_ids, ids({7}));
}

TEST(BuildSupportsTest, UnmatchedImageYieldsEmptySupport) {
  const Reconstruction recon = testutil::make_recon({{1, {{2.0, 2.0, 7}}}});
  DetectionSet dets = testutil::make_dets(
      {{"img1.png", 1, true, 10, 10,
        {testutil::mask_from_rect(1, 0, 10, 10, 0, 0, 4, 4)}},
       {"foreign.png", -1, false, 10, 10,
        {testutil::mask_from_rect(-1, 0, 10, 10, 0, 0, 9, 9)}}});
  const auto supports = build_supports(recon, dets);
  ASSERT_EQ(supports.size(), 2u);
  // Ascending image_id: the unmatched (negative id) support comes first.
  EXPECT_EQ(supports[0].mask_ref, (MaskRef{-1, 0}));
  EXPECT_TRUE(supports[0].point_ids.empty());
  EXPECT_EQ(supports[1].point_ids, ids({7}));
}

TEST(BuildSupportsTest, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(11);
  std::map<ImageId, std::vector<testutil::KpSpec>> images;
  std::vector<ImageDetections> det_images;
  for (ImageId id = 1; id <= 9; ++id) {
    std::vector<testutil::KpSpec> kps;
    for (int k = 0; k < 30; ++k) {
      testutil::KpSpec kp;
      kp.x = static_cast<double>(rng() % 100) / 5.0;
      kp.y = static_cast<double>(rng() % 100) / 5.0;
      if (rng() % 3) kp.pid = static_cast<Point3DId>(1 + rng() % 15);
      kps.push_back(kp);
    }
    images[id] = kps;
    det_images.push_back(
        {"img" + std::to_string(id) + ".png", id, true, 20, 20,
         {testutil::mask_from_rect(id, 0, 20, 20, 0, 0, 9, 9),
          testutil::mask_from_rect(id, 1, 20, 20, 5, 5, 19, 19)}});
  }
  const Reconstruction recon = testutil::make_recon(images);
  const DetectionSet dets = testutil::make_dets(det_images);

  const auto s1 = build_supports(recon, dets, 1);
  const auto s4 = build_supports(recon, dets, 4);
  ASSERT_EQ(s1.size(), s4.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].mask_ref, s4[i].mask_ref);
    EXPECT_EQ(s1[i].point_ids, s4[i].point_ids);
    EXPECT_EQ(s1[i].keypoint_count, s4[i].keypoint_count);
  }
}

TEST(ClusterMasksTest, IdenticalSupportsMerge) {
  const auto instances = cluster_masks(
      {sup(1, 0, ids({1, 2, 3})), sup(2, 0, ids({1, 2, 3}))}, 0.2);
  ASSERT_EQ(instances.size(), 1u);
  EXPECT_EQ(instances[0].members.size(), 2u);
  EXPECT_EQ(instances[0].points, ids({1, 2, 3}));
}

TEST(ClusterMasksTest, DisjointSupportsStaySeparate) {
  const auto instances =
      cluster_masks({sup(1, 0, ids({1, 2})), sup(2, 0, ids({3, 4}))}, 0.2);
  EXPECT_EQ(instances.size(), 2u);
}

TEST(ClusterMasksTest, ChainCaseGrowsThroughUpdatedSignature) {
  // A={1..10}, B={6..15}, C={12..20} at tau=0.25.
  // J(A,B) = 5/15 = 0.333 -> B joins A's group, giving {1..15}.
  // J(group, C) = 4/20 = 0.2 < 0.25 -> C stays separate.
  const std::vector<SegmentSupport> supports = {
      sup(1, 0, range_ids(1, 10)),
      sup(2, 0, range_ids(6, 15)),
      sup(3, 0, range_ids(12, 20)),
  };
  const auto instances = cluster_masks(supports, 0.25);
  ASSERT_EQ(instances.size(), 2u);
  EXPECT_EQ(instances[0].members,
            (std::vector<MaskRef>{{1, 0}, {2, 0}}));
  EXPECT_EQ(instances[0].points, range_ids(1, 15));
  EXPECT_EQ(instances[1].members, (std::vector<MaskRef>{{3, 0}}));

  EXPECT_TRUE(testutil::same_partition(instances,
                                       testutil::naive_cluster(supports, 0.25)));
}

TEST(ClusterMasksTest, EmptySupportsAreNeverClustered) {
  const auto instances =
      cluster_masks({sup(1, 0, {}), sup(2, 0, ids({1}))}, 0.2);
  ASSERT_EQ(instances.size(), 1u);
  EXPECT_EQ(instances[0].members, (std::vector<MaskRef>{{2, 0}}));
}

TEST(ClusterMasksTest, InvariantUnderInputPermutation) {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 30; ++iter) {
    auto supports = testutil::random_supports(rng, 20, 50);
    const auto reference = cluster_masks(supports, 0.3);
    std::shuffle(supports.begin(), supports.end(), rng);
    const auto shuffled = cluster_masks(supports, 0.3);
    ASSERT_EQ(reference.size(), shuffled.size());
    for (std::size_t i = 0; i < reference.size(); ++i) {
      EXPECT_EQ(reference[i].members, shuffled[i].members);
      EXPECT_EQ(reference[i].points, shuffled[i].points);
    }
  }
}

TEST(ClusterMasksTest, GroupPointsEqualUnionOfMembers) {
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 30; ++iter) {
    const auto supports = testutil::random_supports(rng, 25, 60);
    std::map<MaskRef, const SegmentSupport*> by_ref;
    for (const auto& s : supports) by_ref[s.mask_ref] = &s;
    std::set<MaskRef> seen;
    for (const auto& inst : cluster_masks(supports, 0.25)) {
      IdSet expected;
      for (const auto& m : inst.members) {
        EXPECT_TRUE(seen.insert(m).second) << "mask assigned twice";
        expected = set_union(expected, by_ref.at(m)->point_ids);
      }
      EXPECT_EQ(inst.points, expected);
    }
  }
}

TEST(MergeInstancesTest, IdenticalPointSetsMerge) {
  std::vector<BuildingInstance> input = {
      {0, {{1, 0}}, ids({1, 2, 3})},
      {1, {{2, 0}}, ids({1, 2, 3})},
  };
  const auto merged = merge_instances(input, 0.15);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].members, (std::vector<MaskRef>{{1, 0}, {2, 0}}));
  EXPECT_EQ(merged[0].instance_id, 0);
}

TEST(MergeInstancesTest, DisjointInstancesUnchanged) {
  std::vector<BuildingInstance> input = {
      {0, {{1, 0}}, ids({1, 2})},
      {1, {{2, 0}}, ids({3, 4, 5})},
  };
  const auto merged = merge_instances(input, 0.15);
  ASSERT_EQ(merged.size(), 2u);
  // Ids reassigned by descending point count.
  EXPECT_EQ(merged[0].points, ids({3, 4, 5}));
  EXPECT_EQ(merged[0].instance_id, 0);
  EXPECT_EQ(merged[1].points, ids({1, 2}));
  EXPECT_EQ(merged[1].instance_id, 1);
}

TEST(MergeInstancesTest, DocumentedThreeInstanceTrace) {
  // P1={1..10}, P2={8..12}, P3={11..18}, tau=0.2.
  // J(P1,P2) = 3/12 = 0.25 -> merge to {1..12}.
  // J({1..12}, P3) = 2/18 = 0.111 < 0.2 -> two instances remain.
  std::vector<BuildingInstance> input = {
      {0, {{1, 0}}, range_ids(1, 10)},
      {1, {{2, 0}}, range_ids(8, 12)},
      {2, {{3, 0}}, range_ids(11, 18)},
  };
  const auto merged = merge_instances(input, 0.2);
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[0].points, range_ids(1, 12));
  EXPECT_EQ(merged[1].points, range_ids(11, 18));
}

TEST(MergeInstancesTest, FixpointHasNoPairAboveThreshold) {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 40; ++iter) {
    const auto supports = testutil::random_supports(rng, 25, 40);
    auto instances = cluster_masks(supports, 0.35);
    const auto merged = merge_instances(std::move(instances), 0.2);
    for (std::size_t i = 0; i < merged.size(); ++i) {
      for (std::size_t j = i + 1; j < merged.size(); ++j) {
        EXPECT_LT(jaccard(merged[i].points, merged[j].points), 0.2);
      }
    }
  }
}

TEST(FilterAndLabelTest, StrictBoundaryAtNmin) {
  std::vector<SegmentSupport> supports = {sup(1, 0, range_ids(1, 10))};
  std::vector<BuildingInstance> instances = {{0, {{1, 0}}, range_ids(1, 10)}};
  const auto result = filter_and_label(instances, supports, 10);
  EXPECT_TRUE(result.instances.empty());
  EXPECT_TRUE(result.point_labels.empty());
  EXPECT_EQ(result.unassigned_masks, (std::vector<MaskRef>{{1, 0}}));

  // One more point and the instance survives.
  supports[0].point_ids = range_ids(1, 11);
  instances = {{0, {{1, 0}}, range_ids(1, 11)}};
  const auto kept = filter_and_label(instances, supports, 10);
  ASSERT_EQ(kept.instances.size(), 1u);
  EXPECT_EQ(kept.point_labels.size(), 11u);
}

TEST(FilterAndLabelTest, MajorityVoteAndTieBreak) {
  // Point 5 appears in three masks of instance 0 and one mask of instance 1.
  // Point 6 appears in two masks of each; the tie goes to instance 0.
  std::vector<SegmentSupport> supports = {
      sup(1, 0, ids({5, 6, 1, 2})), sup(2, 0, ids({5, 6, 1})),
      sup(3, 0, ids({5, 2})),       sup(4, 0, ids({5, 6, 90, 91})),
      sup(5, 0, ids({6, 90, 92})),  sup(6, 0, ids({90, 91, 92})),
  };
  std::vector<BuildingInstance> instances = {
      {0, {{1, 0}, {2, 0}, {3, 0}}, ids({1, 2, 5, 6})},
      {1, {{4, 0}, {5, 0}, {6, 0}}, ids({5, 6, 90, 91, 92})},
  };
  const auto result = filter_and_label(instances, supports, 0);
  ASSERT_EQ(result.instances.size(), 2u);
  EXPECT_EQ(result.point_labels.at(5), 0);  // 3 votes vs 1
  EXPECT_EQ(result.point_labels.at(6), 0);  // 2 vs 2, lower id wins
  EXPECT_EQ(result.point_labels.at(90), 1);
  // Every labeled point belongs to the winning instance's point set.
  for (const auto& [pid, inst_id] : result.point_labels) {
    const auto& inst = result.instances[static_cast<std::size_t>(inst_id)];
    EXPECT_TRUE(std::binary_search(inst.points.begin(), inst.points.end(), pid));
  }
}

TEST(AssociateTest, EmptyDetectionsGiveEmptyResult) {
  const Reconstruction recon = testutil::make_recon({{1, {{1.0, 1.0, 7}}}});
  const DetectionSet dets = testutil::make_dets({});
  const auto result = associate(recon, dets, AssociationConfig{});
  EXPECT_TRUE(result.instances.empty());
  EXPECT_TRUE(result.point_labels.empty());
  EXPECT_TRUE(result.unassigned_masks.empty());
}

TEST(AssociateTest, RejectsInvalidConfig) {
  const Reconstruction recon;
  const DetectionSet dets = testutil::make_dets({});
  EXPECT_THROW(associate(recon, dets, AssociationConfig{0.0, 0.15, 10}),
               ValidationError);
  EXPECT_THROW(associate(recon, dets, AssociationConfig{0.2, 1.5, 10}),
               ValidationError);
  EXPECT_THROW(associate(recon, dets, AssociationConfig{0.2, 0.15, -1}),
               ValidationError);
}

TEST(AssociationOracleTest, MatchesNaiveReimplementation) {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 25; ++iter) {
    const auto supports = testutil::random_supports(rng, 30, 80);
    const double tau_j = 0.15 + 0.05 * static_cast<double>(rng() % 5);
    const double tau_m = 0.10 + 0.05 * static_cast<double>(rng() % 4);

    const auto clustered = cluster_masks(supports, tau_j);
    const auto naive_c = testutil::naive_cluster(supports, tau_j);
    ASSERT_TRUE(testutil::same_partition(clustered, naive_c))
        << "cluster mismatch at iter " << iter;

    const auto merged = merge_instances(clustered, tau_m);
    const auto naive_m = testutil::naive_merge(naive_c, tau_m);
    ASSERT_TRUE(testutil::same_partition(merged, naive_m))
        << "merge mismatch at iter " << iter;
  }
}
