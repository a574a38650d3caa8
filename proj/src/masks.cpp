#include "sfmseg/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

using nlohmann::json;

void fill_derived(InstanceMask& m, const std::string& where) {
  const std::int64_t total =
      static_cast<std::int64_t>(m.width) * static_cast<std::int64_t>(m.height);
  m.run_ends.clear();
  m.run_ends.reserve(m.rle.size());
  std::int64_t acc = 0;
  m.foreground = 0;
  for (std::size_t i = 0; i < m.rle.size(); ++i) {
    const std::int64_t run = m.rle[i];
    if (run < 0) {
      throw FormatError(where + ": negative run length");
    }
    acc += run;
    if (i % 2 == 1) m.foreground += run;
    m.run_ends.push_back(acc);
  }
  if (acc != total) {
    throw FormatError(where + ": RLE covers " + std::to_string(acc) +
                      " pixels of " + std::to_string(total));
  }
  if (m.foreground < 1) {
    throw FormatError(where + ": mask has no foreground pixels");
  }

  // Bounding box from the runs. A run spanning several rows always touches
  // column 0 (its last row) and column W-1 (its first row).
  const std::int64_t w = m.width;
  std::int64_t x_min = std::numeric_limits<std::int64_t>::max();
  std::int64_t y_min = x_min, x_max = -1, y_max = -1;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < m.rle.size(); ++i) {
    const std::int64_t run = m.rle[i];
    if (i % 2 == 1 && run > 0) {
      const std::int64_t first = pos, last = pos + run - 1;
      const std::int64_t r0 = first / w, r1 = last / w;
      y_min = std::min(y_min, r0);
      y_max = std::max(y_max, r1);
      if (r0 == r1) {
        x_min = std::min(x_min, first % w);
        x_max = std::max(x_max, last % w);
      } else {
        x_min = 0;
        x_max = w - 1;
      }
    }
    pos += run;
  }
  m.bbox = Box{static_cast<double>(x_min), static_cast<double>(y_min),
               static_cast<double>(x_max), static_cast<double>(y_max)};
}

struct RawMask {
  std::string label;
  double score = 0.0;
  std::vector<std::int64_t> rle;
};

struct RawImage {
  std::string name;
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<RawMask> masks;
};

std::vector<RawImage> parse_detections_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array()) {
    throw FormatError(path.string() + ": expected top-level {\"images\": [...]}");
  }

  std::vector<RawImage> out;
  std::set<std::string> seen;
  for (const auto& entry : doc["images"]) {
    RawImage img;
    try {
      img.name = entry.at("name").get<std::string>();
      img.width = entry.at("width").get<std::int32_t>();
      img.height = entry.at("height").get<std::int32_t>();
      if (entry.contains("masks")) {
        for (const auto& jm : entry["masks"]) {
          RawMask rm;
          rm.label = jm.at("label").get<std::string>();
          rm.score = jm.at("score").get<double>();
          rm.rle = jm.at("rle").get<std::vector<std::int64_t>>();
          img.masks.push_back(std::move(rm));
        }
      }
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": image entry '" + img.name +
                        "': " + e.what());
    }
    if (img.width <= 0 || img.height <= 0) {
      throw FormatError(path.string() + ": image '" + img.name +
                        "': nonpositive dimensions");
    }
    if (!seen.insert(img.name).second) {
      throw FormatError(path.string() + ": duplicate image entry '" +
                        img.name + "'");
    }
    out.push_back(std::move(img));
  }
  return out;
}

DetectionSet load_impl(const std::filesystem::path& path,
                       const Reconstruction* recon, double min_score,
                       const std::optional<std::string>& label_filter) {
  if (min_score < 0.0 || min_score > 1.0) {
    throw ValidationError("min_score must lie in [0,1]");
  }
  const auto raw = parse_detections_json(path);

  std::map<std::string, ImageId> name_to_id;
  if (recon != nullptr) {
    for (const auto& [id, image] : recon->images) {
      name_to_id.emplace(image.name, id);
    }
  }

  DetectionSet dets;
  ImageId next_unmatched = -1;
  ImageId next_standalone = 0;
  for (const auto& img : raw) {
    ImageDetections entry;
    entry.name = img.name;
    entry.width = img.width;
    entry.height = img.height;
    if (recon != nullptr) {
      const auto it = name_to_id.find(img.name);
      if (it != name_to_id.end()) {
        entry.image_id = it->second;
        entry.in_reconstruction = true;
      } else {
        entry.image_id = next_unmatched--;
        entry.in_reconstruction = false;
      }
    } else {
      entry.image_id = next_standalone++;
      entry.in_reconstruction = true;
    }

    std::int32_t next_mask_id = 0;
    for (std::size_t mi = 0; mi < img.masks.size(); ++mi) {
      const auto& rm = img.masks[mi];
      const std::string where =
          path.string() + ": image '" + img.name + "' mask " + std::to_string(mi);
      if (rm.score < 0.0 || rm.score > 1.0) {
        throw FormatError(where + ": score " + std::to_string(rm.score) +
                          " outside [0,1]");
      }
      // Validate every mask, then filter.
      InstanceMask mask;
      try {
        mask = make_instance_mask(entry.image_id, next_mask_id, rm.label,
                                  rm.score, img.width, img.height, rm.rle);
      } catch (const FormatError& e) {
        throw FormatError(where + ": " + e.what());
      }
      if (rm.score < min_score) continue;
      if (label_filter && rm.label != *label_filter) continue;
      mask.mask_id = next_mask_id++;
      entry.masks.push_back(std::move(mask));
    }
    dets.images.push_back(std::move(entry));
  }
  reindex(dets);
  return dets;
}

}  // namespace

InstanceMask make_instance_mask(ImageId image_id, std::int32_t mask_id,
                                std::string label, double detection_score,
                                std::int32_t width, std::int32_t height,
                                std::vector<std::int64_t> rle) {
  if (width <= 0 || height <= 0) {
    throw FormatError("mask dimensions must be positive");
  }
  if (detection_score < 0.0 || detection_score > 1.0) {
    throw FormatError("detection score outside [0,1]");
  }
  InstanceMask m;
  m.image_id = image_id;
  m.mask_id = mask_id;
  m.label = std::move(label);
  m.detection_score = detection_score;
  m.width = width;
  m.height = height;
  m.rle = std::move(rle);
  fill_derived(m, "mask (" + std::to_string(image_id) + ", " +
                      std::to_string(mask_id) + ")");
  return m;
}

bool contains(const InstanceMask& mask, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  if (fx < 0.0 || fy < 0.0 || fx >= mask.width || fy >= mask.height) {
    return false;
  }
  const std::int64_t flat = static_cast<std::int64_t>(fy) * mask.width +
                            static_cast<std::int64_t>(fx);
  const auto it =
      std::upper_bound(mask.run_ends.begin(), mask.run_ends.end(), flat);
  return ((it - mask.run_ends.begin()) % 2) == 1;
}

Box bounding_box(const InstanceMask& mask) { return mask.bbox; }

std::vector<std::uint8_t> decode_mask(const InstanceMask& mask) {
  std::vector<std::uint8_t> grid(
      static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height), 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < mask.rle.size(); ++i) {
    const auto run = static_cast<std::size_t>(mask.rle[i]);
    if (i % 2 == 1) {
      std::fill(grid.begin() + pos, grid.begin() + pos + run, std::uint8_t{1});
    }
    pos += run;
  }
  return grid;
}

std::vector<std::int64_t> rle_encode(const std::vector<std::uint8_t>& grid) {
  std::vector<std::int64_t> rle;
  std::uint8_t current = 0;  // runs start with background
  std::int64_t run = 0;
  for (const std::uint8_t v : grid) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit == current) {
      ++run;
    } else {
      rle.push_back(run);
      current = bit;
      run = 1;
    }
  }
  rle.push_back(run);
  if (rle.size() == 1 && rle[0] == 0) rle.clear();  // empty grid
  return rle;
}

void reindex(DetectionSet& dets) {
  dets.by_id.clear();
  dets.by_name.clear();
  for (std::size_t i = 0; i < dets.images.size(); ++i) {
    dets.by_id.emplace(dets.images[i].image_id, i);
    dets.by_name.emplace(dets.images[i].name, i);
  }
}

const ImageDetections* DetectionSet::find_id(ImageId id) const {
  const auto it = by_id.find(id);
  return it == by_id.end() ? nullptr : &images[it->second];
}

const ImageDetections* DetectionSet::find_name(const std::string& name) const {
  const auto it = by_name.find(name);
  return it == by_name.end() ? nullptr : &images[it->second];
}

const InstanceMask* DetectionSet::find_mask(const MaskRef& ref) const {
  const ImageDetections* img = find_id(ref.image_id);
  if (img == nullptr) return nullptr;
  if (ref.mask_id < 0 ||
      static_cast<std::size_t>(ref.mask_id) >= img->masks.size()) {
    return nullptr;
  }
  return &img->masks[static_cast<std::size_t>(ref.mask_id)];
}

const std::string& DetectionSet::image_name(ImageId id) const {
  const ImageDetections* img = find_id(id);
  if (img == nullptr) {
    throw FormatError("no detections entry for image id " + std::to_string(id));
  }
  return img->name;
}

std::size_t DetectionSet::total_masks() const {
  std::size_t n = 0;
  for (const auto& img : images) n += img.masks.size();
  return n;
}

DetectionSet load_detections(const std::filesystem::path& path,
                             const Reconstruction& recon, double min_score,
                             const std::optional<std::string>& label_filter) {
  return load_impl(path, &recon, min_score, label_filter);
}

DetectionSet load_detections(const std::filesystem::path& path,
                             double min_score,
                             const std::optional<std::string>& label_filter) {
  return load_impl(path, nullptr, min_score, label_filter);
}

}  // namespace sfmseg
