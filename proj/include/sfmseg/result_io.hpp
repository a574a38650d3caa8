#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sfmseg/association.hpp"
#include "sfmseg/baseline_tracker.hpp"
#include "sfmseg/masks.hpp"

namespace sfmseg {

/// Serialized form of an association (or baseline) result. Masks are
/// addressed by (image name, mask_id) so the document stands alone from any
/// reconstruction. `meta` is an optional free-form block echoing the run
/// parameters.
struct ResultDocument {
  struct Instance {
    std::int32_t id = 0;
    std::vector<std::pair<std::string, std::int32_t>> masks;
    std::int64_t num_points = 0;
  };

  std::vector<Instance> instances;
  std::map<Point3DId, std::int32_t> point_labels;
  std::vector<std::pair<std::string, std::int32_t>> unassigned;
  nlohmann::ordered_json meta;
};

ResultDocument make_document(const AssociationResult& result,
                             const DetectionSet& dets);

/// Each track becomes an instance with no 3D points.
ResultDocument make_document(const std::vector<Track2D>& tracks,
                             const DetectionSet& dets);

void save_document(const ResultDocument& doc, const std::filesystem::path& path);

/// Throws FormatError on malformed or incomplete documents.
ResultDocument load_document(const std::filesystem::path& path);

}  // namespace sfmseg
