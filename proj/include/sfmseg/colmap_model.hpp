#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sfmseg {

using ImageId = std::int32_t;
using Point3DId = std::int64_t;

/// One 2D observation reference inside a Point3D track.
struct TrackEntry {
  ImageId image_id = 0;
  std::int32_t point2d_index = 0;

  auto operator<=>(const TrackEntry&) const = default;
};

/// A detected 2D feature. `point3d_id` is empty when the keypoint was never
/// triangulated (stored as -1 in the text format).
struct Keypoint2D {
  std::int32_t point2d_index = 0;
  double x = 0.0;
  double y = 0.0;
  std::optional<Point3DId> point3d_id;

  bool operator==(const Keypoint2D&) const = default;
};

struct Point3D {
  Point3DId id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::array<std::uint8_t, 3> color{0, 0, 0};
  double reproj_error = 0.0;
  std::vector<TrackEntry> track;
};

bool operator==(const Point3D& a, const Point3D& b);

struct ImageRecord {
  ImageId image_id = 0;
  std::string name;
  std::int32_t camera_id = 0;
  // Pose as written by COLMAP: x_cam = R(q) * x_world + t. Stored raw, not
  // re-normalized, so a written model reads back bit-exact.
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  std::vector<Keypoint2D> keypoints;
};

bool operator==(const ImageRecord& a, const ImageRecord& b);

/// A sparse model: images with their keypoints and 3D points with their
/// tracks. Immutable after parse and safe to share across threads.
struct Reconstruction {
  std::map<ImageId, ImageRecord> images;
  std::map<Point3DId, Point3D> points3d;
};

bool operator==(const Reconstruction& a, const Reconstruction& b);

/// Reads `images.txt` and `points3D.txt` from `dir` (COLMAP text layout;
/// `cameras.txt` is tolerated and ignored). The two files are parsed
/// concurrently, then cross-validated.
///
/// Throws ParseError (malformed line, with file and line number),
/// DuplicateKeyError (repeated image or point id) or ConsistencyError
/// (dangling or mismatched track reference).
Reconstruction parse_model(const std::filesystem::path& dir);

/// Returns one human-readable description per violated model invariant;
/// empty means the reconstruction is fully consistent.
std::vector<std::string> validate(const Reconstruction& recon);

}  // namespace sfmseg
