#include "sfmseg/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

constexpr std::array<std::uint8_t, 3> kUnlabeledGray{128, 128, 128};
constexpr std::array<std::uint8_t, 3> kHighlightRed{230, 40, 40};

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  if (hp < 1.0) {
    r = c; g = x;
  } else if (hp < 2.0) {
    r = x; g = c;
  } else if (hp < 3.0) {
    g = c; b = x;
  } else if (hp < 4.0) {
    g = x; b = c;
  } else if (hp < 5.0) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  const auto to_byte = [m](double f) {
    return static_cast<std::uint8_t>(std::lround((f + m) * 255.0));
  };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

}  // namespace

std::array<std::uint8_t, 3> palette_color(std::int32_t instance_id) {
  if (instance_id < 0) return kUnlabeledGray;
  // Golden-ratio hue stepping keeps neighboring ids visually distinct.
  const double hue = std::fmod(0.12 + instance_id * 0.61803398874989485, 1.0);
  return hsv_to_rgb(hue, 0.85, 0.95);
}

void export_ply(const Reconstruction& recon, const AssociationResult& result,
                const std::filesystem::path& path, ColorMode mode,
                std::int32_t single_instance_id) {
  if (mode == ColorMode::kSingleInstance) {
    const bool known = std::any_of(
        result.instances.begin(), result.instances.end(),
        [single_instance_id](const BuildingInstance& inst) {
          return inst.instance_id == single_instance_id;
        });
    if (!known) {
      throw ValidationError("unknown instance id " +
                            std::to_string(single_instance_id));
    }
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());

  out << "ply\n"
      << "format ascii 1.0\n"
      << "element vertex " << recon.points3d.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "property int instance_id\n"
      << "end_header\n";

  char buf[160];
  for (const auto& [pid, point] : recon.points3d) {
    const auto it = result.point_labels.find(pid);
    const std::int32_t label = it == result.point_labels.end() ? -1 : it->second;
    std::array<std::uint8_t, 3> rgb = point.color;
    switch (mode) {
      case ColorMode::kInstancePalette:
        rgb = palette_color(label);
        break;
      case ColorMode::kOriginalRgb:
        break;
      case ColorMode::kSingleInstance:
        if (label == single_instance_id) rgb = kHighlightRed;
        break;
    }
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d %d %d %d\n",
                  point.position.x(), point.position.y(), point.position.z(),
                  static_cast<int>(rgb[0]), static_cast<int>(rgb[1]),
                  static_cast<int>(rgb[2]), label);
    out << buf;
  }
}

void export_tracks(const AssociationResult& result, const DetectionSet& dets,
                   const std::filesystem::path& path) {
  using nlohmann::ordered_json;

  const auto entry_json = [&dets](const MaskRef& ref) {
    const InstanceMask* mask = dets.find_mask(ref);
    if (mask == nullptr) {
      throw FormatError("result references unknown mask (image id " +
                        std::to_string(ref.image_id) + ", mask " +
                        std::to_string(ref.mask_id) + ")");
    }
    ordered_json je;
    je["image"] = dets.image_name(ref.image_id);
    je["mask_id"] = ref.mask_id;
    je["bbox"] = {static_cast<std::int64_t>(mask->bbox.x_min),
                  static_cast<std::int64_t>(mask->bbox.y_min),
                  static_cast<std::int64_t>(mask->bbox.x_max),
                  static_cast<std::int64_t>(mask->bbox.y_max)};
    return je;
  };

  const auto by_name = [&dets](const MaskRef& a, const MaskRef& b) {
    const std::string& na = dets.image_name(a.image_id);
    const std::string& nb = dets.image_name(b.image_id);
    if (na != nb) return na < nb;
    return a.mask_id < b.mask_id;
  };

  ordered_json doc;
  doc["instances"] = ordered_json::array();
  for (const auto& inst : result.instances) {
    auto members = inst.members;
    std::sort(members.begin(), members.end(), by_name);
    ordered_json ji;
    ji["id"] = inst.instance_id;
    ji["entries"] = ordered_json::array();
    for (const auto& member : members) {
      ji["entries"].push_back(entry_json(member));
    }
    doc["instances"].push_back(std::move(ji));
  }
  auto unassigned = result.unassigned_masks;
  std::sort(unassigned.begin(), unassigned.end(), by_name);
  doc["unassigned"] = ordered_json::array();
  for (const auto& ref : unassigned) {
    doc["unassigned"].push_back(entry_json(ref));
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace sfmseg
