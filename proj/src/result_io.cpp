#include "sfmseg/result_io.hpp"

#include <fstream>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

using nlohmann::ordered_json;

std::pair<std::string, std::int32_t> named_ref(const MaskRef& ref,
                                               const DetectionSet& dets) {
  return {dets.image_name(ref.image_id), ref.mask_id};
}

}  // namespace

ResultDocument make_document(const AssociationResult& result,
                             const DetectionSet& dets) {
  ResultDocument doc;
  for (const auto& inst : result.instances) {
    ResultDocument::Instance out;
    out.id = inst.instance_id;
    out.num_points = static_cast<std::int64_t>(inst.points.size());
    for (const auto& member : inst.members) {
      out.masks.push_back(named_ref(member, dets));
    }
    doc.instances.push_back(std::move(out));
  }
  doc.point_labels = result.point_labels;
  for (const auto& ref : result.unassigned_masks) {
    doc.unassigned.push_back(named_ref(ref, dets));
  }
  return doc;
}

ResultDocument make_document(const std::vector<Track2D>& tracks,
                             const DetectionSet& dets) {
  ResultDocument doc;
  for (const auto& track : tracks) {
    ResultDocument::Instance out;
    out.id = track.track_id;
    out.num_points = 0;
    for (const auto& entry : track.entries) {
      out.masks.push_back(named_ref(entry.mask, dets));
    }
    doc.instances.push_back(std::move(out));
  }
  return doc;
}

void save_document(const ResultDocument& doc,
                   const std::filesystem::path& path) {
  ordered_json j;
  j["instances"] = ordered_json::array();
  for (const auto& inst : doc.instances) {
    ordered_json ji;
    ji["id"] = inst.id;
    ji["masks"] = ordered_json::array();
    for (const auto& [name, mask_id] : inst.masks) {
      ji["masks"].push_back(ordered_json::array({name, mask_id}));
    }
    ji["num_points"] = inst.num_points;
    j["instances"].push_back(std::move(ji));
  }
  j["point_labels"] = ordered_json::object();
  for (const auto& [pid, inst_id] : doc.point_labels) {
    j["point_labels"][std::to_string(pid)] = inst_id;
  }
  j["unassigned"] = ordered_json::array();
  for (const auto& [name, mask_id] : doc.unassigned) {
    j["unassigned"].push_back(ordered_json::array({name, mask_id}));
  }
  if (!doc.meta.is_null()) {
    j["meta"] = doc.meta;
  }

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

ResultDocument load_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  ResultDocument doc;
  try {
    for (const auto& ji : j.at("instances")) {
      ResultDocument::Instance inst;
      inst.id = ji.at("id").get<std::int32_t>();
      for (const auto& jm : ji.at("masks")) {
        inst.masks.emplace_back(jm.at(0).get<std::string>(),
                                jm.at(1).get<std::int32_t>());
      }
      inst.num_points = ji.at("num_points").get<std::int64_t>();
      doc.instances.push_back(std::move(inst));
    }
    for (const auto& [key, value] : j.at("point_labels").items()) {
      doc.point_labels.emplace(std::stoll(key), value.get<std::int32_t>());
    }
    for (const auto& jm : j.at("unassigned")) {
      doc.unassigned.emplace_back(jm.at(0).get<std::string>(),
                                  jm.at(1).get<std::int32_t>());
    }
    if (j.contains("meta")) {
      doc.meta = j["meta"];
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError(path.string() + ": point_labels keys must be integers");
  }
  return doc;
}

}  // namespace sfmseg
