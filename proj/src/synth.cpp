#include "sfmseg/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

// Street layout: building b is centered at x = b * kSpacing, facades face
// the camera path (y = 0 side). The horizontal gap between neighboring
// buildings projects to hundreds of pixels, so masks of different buildings
// never touch.
constexpr double kSpacing = 24.0;
constexpr double kHalfWidth = 8.0;
constexpr double kDepth = 10.0;
constexpr double kDepthJitter = 1.0;
constexpr double kMinZ = 0.5;
constexpr double kMaxZ = 13.5;
constexpr double kMinFront = 0.1;
constexpr double kDetectionScore = 0.95;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Camera {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d center;
  double fx = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

bool project(const Camera& cam, const Eigen::Vector3d& p, double* u, double* v) {
  const Eigen::Vector3d pc = cam.rotation * (p - cam.center);
  if (pc.z() < kMinFront) return false;
  *u = cam.cx + cam.fx * pc.x() / pc.z();
  *v = cam.cy + cam.fx * pc.y() / pc.z();
  return true;
}

std::vector<std::int64_t> rect_rle(std::int32_t w, std::int32_t h,
                                   std::int64_t x0, std::int64_t y0,
                                   std::int64_t x1, std::int64_t y1) {
  const std::int64_t total = static_cast<std::int64_t>(w) * h;
  const std::int64_t fgw = x1 - x0 + 1;
  std::vector<std::int64_t> rle;
  if (fgw == w) {
    rle.push_back(y0 * w);
    rle.push_back((y1 - y0 + 1) * static_cast<std::int64_t>(w));
  } else {
    rle.push_back(y0 * w + x0);
    const std::int64_t gap = w - fgw;
    for (std::int64_t row = y0; row <= y1; ++row) {
      rle.push_back(fgw);
      if (row != y1) rle.push_back(gap);
    }
  }
  std::int64_t covered = 0;
  for (const std::int64_t r : rle) covered += r;
  if (total - covered > 0) rle.push_back(total - covered);
  return rle;
}

struct PixelBounds {
  double min_u = std::numeric_limits<double>::max();
  double min_v = std::numeric_limits<double>::max();
  double max_u = std::numeric_limits<double>::lowest();
  double max_v = std::numeric_limits<double>::lowest();
  std::int32_t count = 0;

  void add(double u, double v) {
    min_u = std::min(min_u, u);
    min_v = std::min(min_v, v);
    max_u = std::max(max_u, u);
    max_v = std::max(max_v, v);
    ++count;
  }
};

void check_spec(const SceneSpec& spec) {
  const auto fail = [](const std::string& msg) { throw GenerationError(msg); };
  if (spec.num_buildings < 1) fail("num_buildings must be positive");
  if (spec.points_per_building < 1) fail("points_per_building must be positive");
  if (spec.num_frames < 1) fail("num_frames must be positive");
  if (spec.num_sequences < 1) fail("num_sequences must be positive");
  if (spec.num_sequences > spec.num_frames) {
    fail("num_sequences exceeds num_frames");
  }
  if (spec.image_width < 16 || spec.image_height < 16) {
    fail("image dimensions must be at least 16 pixels");
  }
  if (!(spec.keypoint_noise_sigma >= 0.0) ||
      !std::isfinite(spec.keypoint_noise_sigma)) {
    fail("keypoint_noise_sigma must be finite and nonnegative");
  }
  if (spec.track_dropout < 0.0 || spec.track_dropout > 1.0) {
    fail("track_dropout must lie in [0,1]");
  }
  if (spec.wrong_track_rate < 0.0 || spec.wrong_track_rate > 1.0) {
    fail("wrong_track_rate must lie in [0,1]");
  }
  if (spec.split_building) {
    if (*spec.split_building < 0 || *spec.split_building >= spec.num_buildings) {
      fail("split_building out of range");
    }
    if (spec.num_sequences < 2) {
      fail("split_building requires at least two sequences");
    }
    if (spec.split_group_fraction <= 0.5 || spec.split_group_fraction > 1.0) {
      fail("split_group_fraction must lie in (0.5, 1]");
    }
  }
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  check_spec(spec);

  const std::int32_t B = spec.num_buildings;
  const std::int32_t P = spec.points_per_building;
  const std::int32_t W = spec.image_width;
  const std::int32_t H = spec.image_height;

  std::mt19937_64 geom_rng(spec.rng_seed * 6 + 1);
  std::mt19937_64 noise_rng(spec.rng_seed * 6 + 2);
  std::mt19937_64 dropout_rng(spec.rng_seed * 6 + 3);
  std::mt19937_64 wrong_rng(spec.rng_seed * 6 + 4);
  std::mt19937_64 choice_rng(spec.rng_seed * 6 + 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Building point clouds. The split building is kept flat in depth so the
  // projected left-to-right order of its points matches their world order in
  // every frame, which makes index slabs well defined.
  struct BuildingCloud {
    std::vector<Point3DId> ids;  // sorted by world x
    std::vector<Eigen::Vector3d> pos;
    std::vector<std::array<std::uint8_t, 3>> color;
    std::vector<double> reproj;
  };
  std::vector<BuildingCloud> clouds(static_cast<std::size_t>(B));
  {
    std::uniform_real_distribution<double> ux(-kHalfWidth, kHalfWidth);
    std::uniform_real_distribution<double> uy(-kDepthJitter, kDepthJitter);
    std::uniform_real_distribution<double> uz(kMinZ, kMaxZ);
    std::uniform_int_distribution<int> uc(0, 255);
    std::uniform_real_distribution<double> ue(0.05, 0.95);
    for (std::int32_t b = 0; b < B; ++b) {
      const bool flat = spec.split_building && *spec.split_building == b;
      std::vector<std::pair<double, std::int32_t>> order;
      auto& cloud = clouds[static_cast<std::size_t>(b)];
      std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(P));
      std::vector<std::array<std::uint8_t, 3>> color(static_cast<std::size_t>(P));
      std::vector<double> reproj(static_cast<std::size_t>(P));
      for (std::int32_t j = 0; j < P; ++j) {
        const double x = b * kSpacing + ux(geom_rng);
        const double y = kDepth + (flat ? 0.0 : uy(geom_rng));
        const double z = uz(geom_rng);
        pos[static_cast<std::size_t>(j)] = Eigen::Vector3d(x, y, z);
        color[static_cast<std::size_t>(j)] = {
            static_cast<std::uint8_t>(uc(geom_rng)),
            static_cast<std::uint8_t>(uc(geom_rng)),
            static_cast<std::uint8_t>(uc(geom_rng))};
        reproj[static_cast<std::size_t>(j)] = ue(geom_rng);
        order.emplace_back(x, j);
      }
      std::sort(order.begin(), order.end());
      for (const auto& [x, j] : order) {
        cloud.ids.push_back(static_cast<Point3DId>(b) * P + j + 1);
        cloud.pos.push_back(pos[static_cast<std::size_t>(j)]);
        cloud.color.push_back(color[static_cast<std::size_t>(j)]);
        cloud.reproj.push_back(reproj[static_cast<std::size_t>(j)]);
      }
    }
  }

  // cam_x = world x, cam_y = -world z (image y grows downward), cam_z =
  // world y (depth into the street side).
  Eigen::Matrix3d R0;
  R0 << 1, 0, 0,
        0, 0, -1,
        0, 1, 0;
  const Eigen::Quaterniond q0(R0);
  const double fx = 0.22 * W;

  std::vector<std::int32_t> frames_per_seq(
      static_cast<std::size_t>(spec.num_sequences),
      spec.num_frames / spec.num_sequences);
  for (std::int32_t s = 0; s < spec.num_frames % spec.num_sequences; ++s) {
    ++frames_per_seq[static_cast<std::size_t>(s)];
  }

  const double x_lo = 0.0;
  const double x_hi = kSpacing * (B - 1);
  const std::int32_t margin =
      1 + static_cast<std::int32_t>(std::ceil(3.0 * spec.keypoint_noise_sigma));

  Scene scene;
  scene.truth.num_buildings = B;

  // Per-point observations: (image_id, keypoint index).
  std::map<Point3DId, std::vector<TrackEntry>> tracks;
  std::vector<std::int32_t> masks_per_building(static_cast<std::size_t>(B), 0);

  std::int32_t global_frame = 0;
  for (std::int32_t s = 0; s < spec.num_sequences; ++s) {
    const std::int32_t fs = frames_per_seq[static_cast<std::size_t>(s)];
    scene.sequences.emplace_back();
    for (std::int32_t f = 0; f < fs; ++f, ++global_frame) {
      Camera cam;
      cam.rotation = R0;
      const double t = fs == 1 ? 0.5 : static_cast<double>(f) / (fs - 1);
      cam.center = Eigen::Vector3d(x_lo + (x_hi - x_lo) * t,
                                   -1.0 - 1.5 * s, 2.0 + 0.4 * s);
      cam.fx = fx;
      cam.cx = W / 2.0;
      cam.cy = H / 2.0;

      const ImageId image_id = global_frame + 1;
      char name_buf[64];
      std::snprintf(name_buf, sizeof(name_buf), "seq%d_frame%04d.png", s,
                    global_frame);
      const std::string name = name_buf;
      scene.sequences.back().push_back(name);

      ImageRecord image;
      image.image_id = image_id;
      image.name = name;
      image.camera_id = 1;
      image.rotation = q0;
      image.translation = -(R0 * cam.center);

      // Noiseless in-bounds counts decide full visibility; the stored
      // keypoint uses the noisy position and must itself be in bounds.
      std::vector<std::int32_t> visible_count(static_cast<std::size_t>(B), 0);
      std::vector<PixelBounds> bounds(static_cast<std::size_t>(B));
      std::array<PixelBounds, 2> slab_bounds;  // left/right slab of the split building

      struct PendingKp {
        double u, v;
        std::int32_t building;
        std::int32_t slab_rank;  // x-sorted index within its building
        Point3DId pid;
      };
      std::vector<PendingKp> pending;

      for (std::int32_t b = 0; b < B; ++b) {
        const auto& cloud = clouds[static_cast<std::size_t>(b)];
        for (std::int32_t r = 0; r < P; ++r) {
          double u0 = 0.0, v0 = 0.0;
          if (!project(cam, cloud.pos[static_cast<std::size_t>(r)], &u0, &v0)) {
            continue;
          }
          const bool in0 = u0 >= 0.0 && u0 < W && v0 >= 0.0 && v0 < H;
          if (!in0) continue;
          ++visible_count[static_cast<std::size_t>(b)];
          double u = u0, v = v0;
          if (spec.keypoint_noise_sigma > 0.0) {
            std::normal_distribution<double> gauss(0.0, spec.keypoint_noise_sigma);
            u += gauss(noise_rng);
            v += gauss(noise_rng);
          }
          if (!(u >= 0.0 && u < W && v >= 0.0 && v < H)) continue;
          pending.push_back(
              PendingKp{u, v, b, r, cloud.ids[static_cast<std::size_t>(r)]});
        }
      }

      // Keypoints, links and per-building pixel bounds.
      const bool is_split_frame = spec.split_building.has_value();
      const std::int32_t slab_len = static_cast<std::int32_t>(
          std::ceil(spec.split_group_fraction * P));
      for (const auto& pk : pending) {
        Keypoint2D kp;
        kp.point2d_index = static_cast<std::int32_t>(image.keypoints.size());
        kp.x = pk.u;
        kp.y = pk.v;
        const double u_drop = unit(dropout_rng);
        const double u_wrong = unit(wrong_rng);
        if (u_drop < spec.track_dropout) {
          kp.point3d_id.reset();
        } else if (u_wrong < spec.wrong_track_rate && B > 1) {
          std::uniform_int_distribution<std::int32_t> other(0, B - 2);
          std::int32_t b2 = other(choice_rng);
          if (b2 >= pk.building) ++b2;
          std::uniform_int_distribution<std::int32_t> pick(0, P - 1);
          kp.point3d_id = static_cast<Point3DId>(b2) * P + pick(choice_rng) + 1;
        } else {
          kp.point3d_id = pk.pid;
        }
        if (kp.point3d_id) {
          tracks[*kp.point3d_id].push_back(
              TrackEntry{image_id, kp.point2d_index});
        }
        bounds[static_cast<std::size_t>(pk.building)].add(pk.u, pk.v);
        image.keypoints.push_back(kp);

        if (is_split_frame && pk.building == *spec.split_building) {
          if (pk.slab_rank < slab_len) slab_bounds[0].add(pk.u, pk.v);
          if (pk.slab_rank >= P - slab_len) slab_bounds[1].add(pk.u, pk.v);
        }
      }

      // One mask per fully visible building, in building order.
      ImageDetections det;
      det.name = name;
      det.image_id = image_id;
      det.in_reconstruction = true;
      det.width = W;
      det.height = H;
      std::int32_t mask_id = 0;
      for (std::int32_t b = 0; b < B; ++b) {
        if (visible_count[static_cast<std::size_t>(b)] != P) continue;

        PixelBounds pb;
        if (spec.split_building && *spec.split_building == b) {
          const bool group_a = s < spec.num_sequences / 2;
          pb = slab_bounds[group_a ? 0 : 1];
        } else if (spec.mask_mode == MaskMode::kPerBuildingRegion) {
          const auto& cloud = clouds[static_cast<std::size_t>(b)];
          Eigen::Vector3d lo = cloud.pos.front(), hi = cloud.pos.front();
          for (const auto& p : cloud.pos) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
          }
          for (int corner = 0; corner < 8; ++corner) {
            const Eigen::Vector3d c(corner & 1 ? hi.x() : lo.x(),
                                    corner & 2 ? hi.y() : lo.y(),
                                    corner & 4 ? hi.z() : lo.z());
            double u = 0.0, v = 0.0;
            if (project(cam, c, &u, &v)) pb.add(u, v);
          }
        } else {
          pb = bounds[static_cast<std::size_t>(b)];
        }
        if (pb.count == 0) continue;

        const auto clamp_x = [W](std::int64_t v) {
          return std::clamp<std::int64_t>(v, 0, W - 1);
        };
        const auto clamp_y = [H](std::int64_t v) {
          return std::clamp<std::int64_t>(v, 0, H - 1);
        };
        const std::int64_t x0 = clamp_x(static_cast<std::int64_t>(std::floor(pb.min_u)) - margin);
        const std::int64_t y0 = clamp_y(static_cast<std::int64_t>(std::floor(pb.min_v)) - margin);
        const std::int64_t x1 = clamp_x(static_cast<std::int64_t>(std::ceil(pb.max_u)) + margin);
        const std::int64_t y1 = clamp_y(static_cast<std::int64_t>(std::ceil(pb.max_v)) + margin);

        InstanceMask mask = make_instance_mask(
            image_id, mask_id, "building", kDetectionScore, W, H,
            rect_rle(W, H, x0, y0, x1, y1));
        scene.truth.mask_to_building.emplace(MaskRef{image_id, mask_id}, b);
        scene.gt.push_back(GtBox{name, b,
                                 Box{static_cast<double>(x0), static_cast<double>(y0),
                                     static_cast<double>(x1), static_cast<double>(y1)}});
        det.masks.push_back(std::move(mask));
        ++masks_per_building[static_cast<std::size_t>(b)];
        ++mask_id;
      }

      scene.dets.images.push_back(std::move(det));
      scene.recon.images.emplace(image_id, std::move(image));
    }
  }
  reindex(scene.dets);

  for (std::int32_t b = 0; b < B; ++b) {
    if (masks_per_building[static_cast<std::size_t>(b)] == 0) {
      throw GenerationError("building " + std::to_string(b) +
                            " is never fully visible in any frame");
    }
  }

  // Only observed points enter the reconstruction.
  for (const auto& [pid, track] : tracks) {
    const std::int32_t b = static_cast<std::int32_t>((pid - 1) / P);
    const auto& cloud = clouds[static_cast<std::size_t>(b)];
    const auto it = std::find(cloud.ids.begin(), cloud.ids.end(), pid);
    const std::size_t r = static_cast<std::size_t>(it - cloud.ids.begin());
    Point3D point;
    point.id = pid;
    point.position = cloud.pos[r];
    point.color = cloud.color[r];
    point.reproj_error = cloud.reproj[r];
    point.track = track;
    scene.recon.points3d.emplace(pid, std::move(point));
    scene.truth.point_to_building.emplace(pid, b);
  }

  return scene;
}

void write_model(const Reconstruction& recon,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "images.txt");
    if (!out) throw IoError("cannot write " + (dir / "images.txt").string());
    out << "# Image list with two lines of data per image:\n"
        << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto& [id, image] : recon.images) {
      out << id << ' ' << fmt_double(image.rotation.w()) << ' '
          << fmt_double(image.rotation.x()) << ' '
          << fmt_double(image.rotation.y()) << ' '
          << fmt_double(image.rotation.z()) << ' '
          << fmt_double(image.translation.x()) << ' '
          << fmt_double(image.translation.y()) << ' '
          << fmt_double(image.translation.z()) << ' ' << image.camera_id
          << ' ' << image.name << '\n';
      bool first = true;
      for (const auto& kp : image.keypoints) {
        if (!first) out << ' ';
        first = false;
        out << fmt_double(kp.x) << ' ' << fmt_double(kp.y) << ' '
            << (kp.point3d_id ? std::to_string(*kp.point3d_id)
                              : std::string("-1"));
      }
      out << '\n';
    }
  }

  {
    std::ofstream out(dir / "points3D.txt");
    if (!out) throw IoError("cannot write " + (dir / "points3D.txt").string());
    out << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, "
           "TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (const auto& [id, point] : recon.points3d) {
      out << id << ' ' << fmt_double(point.position.x()) << ' '
          << fmt_double(point.position.y()) << ' '
          << fmt_double(point.position.z()) << ' '
          << static_cast<int>(point.color[0]) << ' '
          << static_cast<int>(point.color[1]) << ' '
          << static_cast<int>(point.color[2]) << ' '
          << fmt_double(point.reproj_error);
      for (const auto& entry : point.track) {
        out << ' ' << entry.image_id << ' ' << entry.point2d_index;
      }
      out << '\n';
    }
  }
}

void write_scene(const Scene& scene, const SceneSpec& spec,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_model(scene.recon, out_dir / "model");

  {
    std::ofstream out(out_dir / "model" / "cameras.txt");
    if (!out) throw IoError("cannot write cameras.txt");
    out << "# Camera list with one line of data per camera:\n"
        << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
        << "1 PINHOLE " << spec.image_width << ' ' << spec.image_height << ' '
        << fmt_double(0.22 * spec.image_width) << ' '
        << fmt_double(0.22 * spec.image_width) << ' '
        << fmt_double(spec.image_width / 2.0) << ' '
        << fmt_double(spec.image_height / 2.0) << '\n';
  }

  {
    nlohmann::ordered_json doc;
    doc["images"] = nlohmann::ordered_json::array();
    for (const auto& img : scene.dets.images) {
      nlohmann::ordered_json ji;
      ji["name"] = img.name;
      ji["width"] = img.width;
      ji["height"] = img.height;
      ji["masks"] = nlohmann::ordered_json::array();
      for (const auto& mask : img.masks) {
        nlohmann::ordered_json jm;
        jm["label"] = mask.label;
        jm["score"] = mask.detection_score;
        jm["rle"] = mask.rle;
        ji["masks"].push_back(std::move(jm));
      }
      doc["images"].push_back(std::move(ji));
    }
    std::ofstream out(out_dir / "detections.json");
    if (!out) throw IoError("cannot write detections.json");
    out << doc.dump(2) << "\n";
  }

  {
    std::ofstream out(out_dir / "gt.csv");
    if (!out) throw IoError("cannot write gt.csv");
    out << "frame,gt_id,x_min,y_min,x_max,y_max\n";
    for (const auto& box : scene.gt) {
      out << box.frame << ',' << box.gt_id << ','
          << static_cast<std::int64_t>(box.box.x_min) << ','
          << static_cast<std::int64_t>(box.box.y_min) << ','
          << static_cast<std::int64_t>(box.box.x_max) << ','
          << static_cast<std::int64_t>(box.box.y_max) << '\n';
    }
  }

  {
    nlohmann::ordered_json doc;
    doc["num_buildings"] = scene.truth.num_buildings;
    doc["point_to_building"] = nlohmann::ordered_json::object();
    for (const auto& [pid, b] : scene.truth.point_to_building) {
      doc["point_to_building"][std::to_string(pid)] = b;
    }
    doc["mask_to_building"] = nlohmann::ordered_json::array();
    for (const auto& [ref, b] : scene.truth.mask_to_building) {
      doc["mask_to_building"].push_back(nlohmann::ordered_json::array(
          {scene.dets.image_name(ref.image_id), ref.mask_id, b}));
    }
    doc["sequences"] = scene.sequences;
    std::ofstream out(out_dir / "truth.json");
    if (!out) throw IoError("cannot write truth.json");
    out << doc.dump(2) << "\n";
  }

  {
    std::ofstream out(out_dir / "order.txt");
    if (!out) throw IoError("cannot write order.txt");
    for (std::size_t s = 0; s < scene.sequences.size(); ++s) {
      if (s > 0) out << '\n';
      for (const auto& name : scene.sequences[s]) {
        out << name << '\n';
      }
    }
  }
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string file = path.filename().string();

  SceneSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    const auto strip = [](const std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    if (eq == std::string::npos) {
      if (!strip(line).empty()) {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": expected key = value");
      }
      continue;
    }
    const std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const auto as_int = [&](std::int64_t* out_v) {
      std::int64_t v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": expected integer for " + key);
      }
      *out_v = v;
    };
    const auto as_double = [&](double* out_v) {
      double v = 0.0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": expected number for " + key);
      }
      *out_v = v;
    };

    std::int64_t iv = 0;
    if (key == "num_buildings") {
      as_int(&iv);
      spec.num_buildings = static_cast<std::int32_t>(iv);
    } else if (key == "points_per_building") {
      as_int(&iv);
      spec.points_per_building = static_cast<std::int32_t>(iv);
    } else if (key == "num_frames") {
      as_int(&iv);
      spec.num_frames = static_cast<std::int32_t>(iv);
    } else if (key == "num_sequences") {
      as_int(&iv);
      spec.num_sequences = static_cast<std::int32_t>(iv);
    } else if (key == "image_width") {
      as_int(&iv);
      spec.image_width = static_cast<std::int32_t>(iv);
    } else if (key == "image_height") {
      as_int(&iv);
      spec.image_height = static_cast<std::int32_t>(iv);
    } else if (key == "keypoint_noise_sigma") {
      as_double(&spec.keypoint_noise_sigma);
    } else if (key == "track_dropout") {
      as_double(&spec.track_dropout);
    } else if (key == "wrong_track_rate") {
      as_double(&spec.wrong_track_rate);
    } else if (key == "mask_mode") {
      if (value == "bbox-hull") {
        spec.mask_mode = MaskMode::kBboxHull;
      } else if (value == "per-building-region") {
        spec.mask_mode = MaskMode::kPerBuildingRegion;
      } else {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": mask_mode must be bbox-hull or per-building-region");
      }
    } else if (key == "rng_seed") {
      as_int(&iv);
      spec.rng_seed = static_cast<std::uint64_t>(iv);
    } else if (key == "split_building") {
      as_int(&iv);
      spec.split_building = static_cast<std::int32_t>(iv);
    } else if (key == "split_group_fraction") {
      as_double(&spec.split_group_fraction);
    } else {
      throw ParseError(file + ":" + std::to_string(lineno) + ": unknown key '" +
                       key + "'");
    }
  }
  return spec;
}

}  // namespace sfmseg
