#include "sfmseg/colmap_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <string_view>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

bool is_comment(std::string_view s) {
  const auto pos = s.find_first_not_of(" \t");
  return pos != std::string_view::npos && s[pos] == '#';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void fail_parse(const std::string& file, std::size_t lineno,
                             const std::string& what) {
  throw ParseError(file + ":" + std::to_string(lineno) + ": " + what);
}

double parse_double(std::string_view tok, const std::string& file,
                    std::size_t lineno) {
  double value = 0.0;
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    fail_parse(file, lineno, "unparsable number '" + std::string(tok) + "'");
  }
  return value;
}

long long parse_int(std::string_view tok, const std::string& file,
                    std::size_t lineno) {
  long long value = 0;
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    fail_parse(file, lineno, "unparsable integer '" + std::string(tok) + "'");
  }
  return value;
}

std::map<ImageId, ImageRecord> parse_images_file(
    const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = read_lines(path);
  std::map<ImageId, ImageRecord> images;

  std::size_t idx = 0;
  while (idx < lines.size()) {
    const std::string_view line = lines[idx];
    if (is_blank(line) || is_comment(line)) {
      ++idx;
      continue;
    }
    const std::size_t header_lineno = idx + 1;
    const auto fields = split_fields(line);
    if (fields.size() != 10) {
      fail_parse(file, header_lineno,
                 "expected 10 fields (IMAGE_ID QW QX QY QZ TX TY TZ "
                 "CAMERA_ID NAME), got " + std::to_string(fields.size()));
    }

    ImageRecord image;
    image.image_id = static_cast<ImageId>(parse_int(fields[0], file, header_lineno));
    const double qw = parse_double(fields[1], file, header_lineno);
    const double qx = parse_double(fields[2], file, header_lineno);
    const double qy = parse_double(fields[3], file, header_lineno);
    const double qz = parse_double(fields[4], file, header_lineno);
    image.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
    image.translation = Eigen::Vector3d(parse_double(fields[5], file, header_lineno),
                                        parse_double(fields[6], file, header_lineno),
                                        parse_double(fields[7], file, header_lineno));
    image.camera_id = static_cast<std::int32_t>(parse_int(fields[8], file, header_lineno));
    image.name = std::string(fields[9]);

    ++idx;
    if (idx >= lines.size()) {
      fail_parse(file, header_lineno + 1,
                 "missing keypoints line for image " + std::to_string(image.image_id));
    }
    const std::size_t kp_lineno = idx + 1;
    const auto kp_fields = split_fields(lines[idx]);
    if (kp_fields.size() % 3 != 0) {
      fail_parse(file, kp_lineno,
                 "keypoints line must hold X Y POINT3D_ID triples, got " +
                     std::to_string(kp_fields.size()) + " fields");
    }
    image.keypoints.reserve(kp_fields.size() / 3);
    for (std::size_t k = 0; k + 3 <= kp_fields.size(); k += 3) {
      Keypoint2D kp;
      kp.point2d_index = static_cast<std::int32_t>(image.keypoints.size());
      kp.x = parse_double(kp_fields[k], file, kp_lineno);
      kp.y = parse_double(kp_fields[k + 1], file, kp_lineno);
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
        fail_parse(file, kp_lineno, "non-finite keypoint coordinate");
      }
      const long long pid = parse_int(kp_fields[k + 2], file, kp_lineno);
      if (pid == -1) {
        kp.point3d_id.reset();
      } else if (pid < 0) {
        fail_parse(file, kp_lineno,
                   "invalid point3D id " + std::to_string(pid) +
                       " (only -1 marks an absent point)");
      } else {
        kp.point3d_id = static_cast<Point3DId>(pid);
      }
      image.keypoints.push_back(std::move(kp));
    }
    ++idx;

    if (images.count(image.image_id) != 0) {
      throw DuplicateKeyError(file + ": duplicate image id " +
                              std::to_string(image.image_id));
    }
    images.emplace(image.image_id, std::move(image));
  }
  return images;
}

std::map<Point3DId, Point3D> parse_points_file(
    const std::filesystem::path& path) {
  const std::string file = path.filename().string();
  const auto lines = read_lines(path);
  std::map<Point3DId, Point3D> points;

  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const std::string_view line = lines[idx];
    if (is_blank(line) || is_comment(line)) continue;
    const std::size_t lineno = idx + 1;
    const auto fields = split_fields(line);
    if (fields.size() < 8) {
      fail_parse(file, lineno,
                 "expected at least 8 fields (POINT3D_ID X Y Z R G B ERROR), got " +
                     std::to_string(fields.size()));
    }
    if ((fields.size() - 8) % 2 != 0) {
      fail_parse(file, lineno, "track must hold IMAGE_ID POINT2D_IDX pairs");
    }
    if (fields.size() == 8) {
      fail_parse(file, lineno, "empty track");
    }

    Point3D point;
    const long long id = parse_int(fields[0], file, lineno);
    if (id < 0) {
      fail_parse(file, lineno, "invalid point3D id " + std::to_string(id));
    }
    point.id = static_cast<Point3DId>(id);
    for (int d = 0; d < 3; ++d) {
      point.position[d] = parse_double(fields[1 + d], file, lineno);
    }
    for (int c = 0; c < 3; ++c) {
      const long long v = parse_int(fields[4 + c], file, lineno);
      if (v < 0 || v > 255) {
        fail_parse(file, lineno, "color channel out of range: " + std::to_string(v));
      }
      point.color[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(v);
    }
    point.reproj_error = parse_double(fields[7], file, lineno);
    if (!std::isfinite(point.reproj_error) || point.reproj_error < 0.0) {
      fail_parse(file, lineno, "reprojection error must be finite and nonnegative");
    }
    for (std::size_t k = 8; k + 1 < fields.size(); k += 2) {
      TrackEntry entry;
      entry.image_id = static_cast<ImageId>(parse_int(fields[k], file, lineno));
      const long long p2d = parse_int(fields[k + 1], file, lineno);
      if (p2d < 0) {
        fail_parse(file, lineno, "negative point2D index in track");
      }
      entry.point2d_index = static_cast<std::int32_t>(p2d);
      point.track.push_back(entry);
    }

    if (points.count(point.id) != 0) {
      throw DuplicateKeyError(file + ": duplicate point3D id " +
                              std::to_string(point.id));
    }
    points.emplace(point.id, std::move(point));
  }
  return points;
}

std::string point3d_id_str(const std::optional<Point3DId>& id) {
  return id ? std::to_string(*id) : std::string("none");
}

}  // namespace

bool operator==(const Point3D& a, const Point3D& b) {
  return a.id == b.id && a.position.x() == b.position.x() &&
         a.position.y() == b.position.y() && a.position.z() == b.position.z() &&
         a.color == b.color && a.reproj_error == b.reproj_error &&
         a.track == b.track;
}

bool operator==(const ImageRecord& a, const ImageRecord& b) {
  return a.image_id == b.image_id && a.name == b.name &&
         a.camera_id == b.camera_id &&
         a.rotation.coeffs() == b.rotation.coeffs() &&
         a.translation.x() == b.translation.x() &&
         a.translation.y() == b.translation.y() &&
         a.translation.z() == b.translation.z() && a.keypoints == b.keypoints;
}

bool operator==(const Reconstruction& a, const Reconstruction& b) {
  return a.images == b.images && a.points3d == b.points3d;
}

Reconstruction parse_model(const std::filesystem::path& dir) {
  const auto images_path = dir / "images.txt";
  const auto points_path = dir / "points3D.txt";
  if (!std::filesystem::is_regular_file(images_path)) {
    throw IoError("missing " + images_path.string());
  }
  if (!std::filesystem::is_regular_file(points_path)) {
    throw IoError("missing " + points_path.string());
  }

  auto images_future = std::async(std::launch::async, parse_images_file, images_path);
  auto points_future = std::async(std::launch::async, parse_points_file, points_path);

  Reconstruction recon;
  // Join both futures before rethrowing so neither parse is abandoned.
  std::exception_ptr err;
  try {
    recon.images = images_future.get();
  } catch (...) {
    err = std::current_exception();
  }
  try {
    recon.points3d = points_future.get();
  } catch (...) {
    if (!err) err = std::current_exception();
  }
  if (err) std::rethrow_exception(err);

  const auto violations = validate(recon);
  if (!violations.empty()) {
    std::string msg = violations.front();
    if (violations.size() > 1) {
      msg += " (and " + std::to_string(violations.size() - 1) + " more)";
    }
    throw ConsistencyError(msg);
  }
  return recon;
}

std::vector<std::string> validate(const Reconstruction& recon) {
  std::vector<std::string> out;
  const auto add = [&out](std::string msg) { out.push_back(std::move(msg)); };

  for (const auto& [id, image] : recon.images) {
    const double norm = image.rotation.coeffs().norm();
    if (std::abs(norm - 1.0) > 1e-6) {
      add("image " + std::to_string(id) + ": quaternion norm " +
          std::to_string(norm) + " deviates from 1");
    }
    for (std::size_t k = 0; k < image.keypoints.size(); ++k) {
      const auto& kp = image.keypoints[k];
      if (kp.point2d_index != static_cast<std::int32_t>(k)) {
        add("image " + std::to_string(id) + " keypoint " + std::to_string(k) +
            ": point2d_index " + std::to_string(kp.point2d_index) +
            " is out of sequence");
      }
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
        add("image " + std::to_string(id) + " keypoint " + std::to_string(k) +
            ": non-finite coordinates");
      }
    }
  }

  // Which (image, keypoint) slots are claimed by which point's track.
  std::map<std::pair<ImageId, std::int32_t>, Point3DId> claimed;
  for (const auto& [pid, point] : recon.points3d) {
    if (point.track.empty()) {
      add("point " + std::to_string(pid) + ": empty track");
    }
    if (!std::isfinite(point.reproj_error) || point.reproj_error < 0.0) {
      add("point " + std::to_string(pid) +
          ": reprojection error must be finite and nonnegative");
    }
    for (const auto& entry : point.track) {
      const auto img_it = recon.images.find(entry.image_id);
      if (img_it == recon.images.end()) {
        add("point " + std::to_string(pid) + ": track references missing image " +
            std::to_string(entry.image_id));
        continue;
      }
      const auto& keypoints = img_it->second.keypoints;
      if (entry.point2d_index < 0 ||
          static_cast<std::size_t>(entry.point2d_index) >= keypoints.size()) {
        add("point " + std::to_string(pid) + ": track entry (image " +
            std::to_string(entry.image_id) + ", keypoint " +
            std::to_string(entry.point2d_index) + ") is out of range");
        continue;
      }
      const auto& kp = keypoints[static_cast<std::size_t>(entry.point2d_index)];
      if (!kp.point3d_id || *kp.point3d_id != pid) {
        add("point " + std::to_string(pid) + ": track entry (image " +
            std::to_string(entry.image_id) + ", keypoint " +
            std::to_string(entry.point2d_index) +
            ") disagrees: keypoint links to " + point3d_id_str(kp.point3d_id));
      }
      const auto key = std::make_pair(entry.image_id, entry.point2d_index);
      const auto [it, inserted] = claimed.emplace(key, pid);
      if (!inserted) {
        add("observation (image " + std::to_string(entry.image_id) +
            ", keypoint " + std::to_string(entry.point2d_index) +
            ") appears in tracks of points " + std::to_string(it->second) +
            " and " + std::to_string(pid));
      }
    }
  }

  for (const auto& [id, image] : recon.images) {
    for (const auto& kp : image.keypoints) {
      if (!kp.point3d_id) continue;
      if (recon.points3d.count(*kp.point3d_id) == 0) {
        add("image " + std::to_string(id) + " keypoint " +
            std::to_string(kp.point2d_index) + ": references missing point " +
            std::to_string(*kp.point3d_id));
        continue;
      }
      const auto it = claimed.find(std::make_pair(id, kp.point2d_index));
      if (it == claimed.end() || it->second != *kp.point3d_id) {
        add("image " + std::to_string(id) + " keypoint " +
            std::to_string(kp.point2d_index) + ": links point " +
            std::to_string(*kp.point3d_id) + " but is absent from its track");
      }
    }
  }

  return out;
}

}  // namespace sfmseg
