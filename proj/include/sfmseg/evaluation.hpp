#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sfmseg/masks.hpp"
#include "sfmseg/result_io.hpp"

namespace sfmseg {

struct GtBox {
  std::string frame;  // image name
  std::int32_t gt_id = 0;
  Box box;

  bool operator==(const GtBox&) const = default;
};

/// Reads a CSV with header `frame,gt_id,x_min,y_min,x_max,y_max`. Throws
/// ParseError (malformed row, with line number) or ValidationError
/// (inverted box).
std::vector<GtBox> load_gt(const std::filesystem::path& path);

/// Inclusive-pixel intersection-over-union of two boxes, in [0,1].
double box_iou(const Box& a, const Box& b);

struct InstanceScore {
  std::int32_t gt_id = 0;
  std::int32_t total_frames = 0;
  std::int32_t matched_frames = 0;
  std::int32_t missed_seg_frames = 0;
  double coverage = 0.0;
  double adjusted_coverage = 0.0;
  // True when every GT frame lacked a usable detection; adjusted_coverage
  // is reported as 1 and the instance is excluded from the adjusted mean.
  bool vacuous = false;
};

struct EvaluationReport {
  std::vector<InstanceScore> per_instance;  // ascending gt_id
  double mean_coverage = 0.0;
  double mean_adjusted_coverage = 0.0;
  // Frame-weighted variants (sums of numerators over sums of denominators).
  double weighted_coverage = 0.0;
  double weighted_adjusted_coverage = 0.0;
  std::map<std::int32_t, std::int32_t> id_mapping;  // predicted id -> gt_id
  std::vector<std::string> warnings;
};

/// Maximum-total value of a one-to-one (partial) assignment between rows
/// and columns of a nonnegative matrix.
std::int64_t assignment_value(
    const std::vector<std::vector<std::int64_t>>& value);

/// Scores predicted instances against GT boxes.
///
/// A predicted instance matches GT g in frame f when one of its member
/// masks in f has bounding-box IoU >= tau_eval against a box of g in f.
/// Predicted instances are mapped one-to-one onto GT ids by an optimal
/// assignment on the per-pair matched-frame counts; among optimal
/// assignments the canonical one maximizes, for each gt_id in ascending
/// order, that instance's matched count, breaking remaining ties by lowest
/// predicted id. A GT frame counts as missed-seg when no detection mask at
/// all reaches tau_eval against it.
EvaluationReport evaluate(const ResultDocument& predictions,
                          const DetectionSet& dets,
                          const std::vector<GtBox>& gt, double tau_eval);

void write_report_json(const EvaluationReport& report,
                       const std::filesystem::path& path);
void write_report_csv(const EvaluationReport& report,
                      const std::filesystem::path& path);
std::string format_report_table(const EvaluationReport& report);

}  // namespace sfmseg
