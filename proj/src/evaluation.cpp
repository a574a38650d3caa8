#include "sfmseg/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sfmseg/errors.hpp"

namespace sfmseg {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& tok, const std::string& file,
                 std::size_t lineno) {
  const std::string t = trim(tok);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParseError(file + ":" + std::to_string(lineno) +
                     ": unparsable number '" + tok + "'");
  }
  return value;
}

// Kuhn-Munkres with potentials; minimizes over a square cost matrix.
std::int64_t hungarian_min(const std::vector<std::vector<std::int64_t>>& a) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0;
  const std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::int64_t> v(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<std::int64_t> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      std::int64_t delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const std::int64_t cur =
            a[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
            u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::int64_t cost = 0;
  for (int j = 1; j <= n; ++j) {
    cost += a[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)]
             [static_cast<std::size_t>(j - 1)];
  }
  return cost;
}

// Aggregated GT instance: frames (deduped) with their boxes.
struct GtAgg {
  std::int32_t gt_id = 0;
  std::map<std::string, std::vector<Box>> frames;
};

}  // namespace

std::vector<GtBox> load_gt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  const std::string file = path.filename().string();
  std::string line;
  std::size_t lineno = 0;
  std::vector<GtBox> boxes;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      std::string squashed;
      for (const char c : t) {
        if (c != ' ' && c != '\t') squashed += c;
      }
      if (squashed != "frame,gt_id,x_min,y_min,x_max,y_max") {
        throw ParseError(file + ":" + std::to_string(lineno) +
                         ": expected header frame,gt_id,x_min,y_min,x_max,y_max");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_csv(t);
    if (fields.size() != 6) {
      throw ParseError(file + ":" + std::to_string(lineno) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    }
    GtBox gt;
    gt.frame = trim(fields[0]);
    if (gt.frame.empty()) {
      throw ParseError(file + ":" + std::to_string(lineno) + ": empty frame");
    }
    const double id = parse_num(fields[1], file, lineno);
    if (id != std::floor(id)) {
      throw ParseError(file + ":" + std::to_string(lineno) + ": gt_id must be an integer");
    }
    gt.gt_id = static_cast<std::int32_t>(id);
    gt.box.x_min = parse_num(fields[2], file, lineno);
    gt.box.y_min = parse_num(fields[3], file, lineno);
    gt.box.x_max = parse_num(fields[4], file, lineno);
    gt.box.y_max = parse_num(fields[5], file, lineno);
    if (gt.box.x_min > gt.box.x_max || gt.box.y_min > gt.box.y_max) {
      throw ValidationError(file + ":" + std::to_string(lineno) +
                            ": inverted box for gt_id " + std::to_string(gt.gt_id));
    }
    boxes.push_back(std::move(gt));
  }
  if (!header_seen) {
    throw ParseError(file + ": missing header row");
  }
  return boxes;
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min) + 1.0;
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min) + 1.0;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.x_max - a.x_min + 1.0) * (a.y_max - a.y_min + 1.0);
  const double area_b = (b.x_max - b.x_min + 1.0) * (b.y_max - b.y_min + 1.0);
  return inter / (area_a + area_b - inter);
}

std::int64_t assignment_value(
    const std::vector<std::vector<std::int64_t>>& value) {
  const std::size_t rows = value.size();
  std::size_t cols = 0;
  for (const auto& row : value) cols = std::max(cols, row.size());
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return 0;

  std::int64_t max_v = 0;
  for (const auto& row : value) {
    for (const std::int64_t v : row) {
      if (v < 0) throw ValidationError("assignment values must be nonnegative");
      max_v = std::max(max_v, v);
    }
  }
  std::vector<std::vector<std::int64_t>> cost(
      n, std::vector<std::int64_t>(n, max_v));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < value[i].size(); ++j) {
      cost[i][j] = max_v - value[i][j];
    }
  }
  return static_cast<std::int64_t>(n) * max_v - hungarian_min(cost);
}

EvaluationReport evaluate(const ResultDocument& predictions,
                          const DetectionSet& dets,
                          const std::vector<GtBox>& gt, double tau_eval) {
  if (!(tau_eval > 0.0 && tau_eval <= 1.0)) {
    throw ValidationError("tau_eval must lie in (0,1]");
  }

  EvaluationReport report;

  std::map<std::int32_t, GtAgg> gts;
  std::set<std::string> unknown_frames;
  for (const auto& box : gt) {
    auto& agg = gts[box.gt_id];
    agg.gt_id = box.gt_id;
    agg.frames[box.frame].push_back(box.box);
    if (dets.find_name(box.frame) == nullptr) {
      unknown_frames.insert(box.frame);
    }
  }
  for (const auto& frame : unknown_frames) {
    report.warnings.push_back("GT frame '" + frame +
                              "' has no detections entry; counted in totals");
  }

  // Member mask boxes per predicted instance per frame.
  struct PredAgg {
    std::int32_t id = 0;
    std::map<std::string, std::vector<Box>> frames;
  };
  std::map<std::int32_t, PredAgg> preds;
  for (const auto& inst : predictions.instances) {
    auto& agg = preds[inst.id];
    agg.id = inst.id;
    for (const auto& [name, mask_id] : inst.masks) {
      const ImageDetections* img = dets.find_name(name);
      if (img == nullptr || mask_id < 0 ||
          static_cast<std::size_t>(mask_id) >= img->masks.size()) {
        throw FormatError("prediction instance " + std::to_string(inst.id) +
                          " references unknown mask ('" + name + "', " +
                          std::to_string(mask_id) + ")");
      }
      agg.frames[name].push_back(img->masks[static_cast<std::size_t>(mask_id)].bbox);
    }
  }

  const auto matches_gt = [tau_eval](const std::vector<Box>& candidates,
                                     const std::vector<Box>& gt_boxes) {
    for (const auto& c : candidates) {
      for (const auto& g : gt_boxes) {
        if (box_iou(c, g) >= tau_eval) return true;
      }
    }
    return false;
  };

  std::vector<const GtAgg*> rows;
  rows.reserve(gts.size());
  for (const auto& [id, agg] : gts) rows.push_back(&agg);
  std::vector<const PredAgg*> cols;
  cols.reserve(preds.size());
  for (const auto& [id, agg] : preds) cols.push_back(&agg);

  // count[r][c]: frames of gt r in which instance c has a matching mask.
  std::vector<std::vector<std::int64_t>> count(
      rows.size(), std::vector<std::int64_t>(cols.size(), 0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [frame, gt_boxes] : rows[r]->frames) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto it = cols[c]->frames.find(frame);
        if (it == cols[c]->frames.end()) continue;
        if (matches_gt(it->second, gt_boxes)) ++count[r][c];
      }
    }
  }

  // Optimal one-to-one mapping; canonical among ties: ascending gt_id, each
  // taking the largest achievable count, then the lowest instance id.
  const std::int64_t best_total = assignment_value(count);
  std::vector<int> col_of_row(rows.size(), -1);
  std::vector<bool> col_used(cols.size(), false);
  std::int64_t base = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    struct Cand {
      std::int64_t count;
      std::size_t col;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!col_used[c] && count[r][c] > 0) {
        cands.push_back(Cand{count[r][c], c});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.col < b.col;
    });
    for (const auto& cand : cands) {
      // Rest value with rows > r free and this column consumed.
      std::vector<std::vector<std::int64_t>> rest;
      for (std::size_t r2 = r + 1; r2 < rows.size(); ++r2) {
        std::vector<std::int64_t> row;
        for (std::size_t c2 = 0; c2 < cols.size(); ++c2) {
          if (col_used[c2] || c2 == cand.col) continue;
          row.push_back(count[r2][c2]);
        }
        rest.push_back(std::move(row));
      }
      if (base + cand.count + assignment_value(rest) == best_total) {
        col_of_row[r] = static_cast<int>(cand.col);
        col_used[cand.col] = true;
        base += cand.count;
        break;
      }
    }
  }

  double sum_cov = 0.0, sum_adj = 0.0;
  std::int64_t n_adj = 0;
  std::int64_t w_matched = 0, w_total = 0, w_den = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const GtAgg& g = *rows[r];
    InstanceScore score;
    score.gt_id = g.gt_id;
    score.total_frames = static_cast<std::int32_t>(g.frames.size());
    score.matched_frames =
        col_of_row[r] >= 0
            ? static_cast<std::int32_t>(count[r][static_cast<std::size_t>(col_of_row[r])])
            : 0;

    for (const auto& [frame, gt_boxes] : g.frames) {
      const ImageDetections* img = dets.find_name(frame);
      bool any = false;
      if (img != nullptr) {
        for (const auto& mask : img->masks) {
          for (const auto& b : gt_boxes) {
            if (box_iou(mask.bbox, b) >= tau_eval) {
              any = true;
              break;
            }
          }
          if (any) break;
        }
      }
      if (!any) ++score.missed_seg_frames;
    }

    score.coverage = static_cast<double>(score.matched_frames) /
                     static_cast<double>(score.total_frames);
    const std::int32_t denom = score.total_frames - score.missed_seg_frames;
    if (denom == 0) {
      score.vacuous = true;
      score.adjusted_coverage = 1.0;
    } else {
      score.adjusted_coverage =
          static_cast<double>(score.matched_frames) / static_cast<double>(denom);
      sum_adj += score.adjusted_coverage;
      ++n_adj;
    }
    sum_cov += score.coverage;
    w_matched += score.matched_frames;
    w_total += score.total_frames;
    w_den += denom;

    if (col_of_row[r] >= 0) {
      report.id_mapping.emplace(cols[static_cast<std::size_t>(col_of_row[r])]->id,
                                g.gt_id);
    }
    report.per_instance.push_back(score);
  }

  const std::size_t n = rows.size();
  report.mean_coverage = n > 0 ? sum_cov / static_cast<double>(n) : 0.0;
  report.mean_adjusted_coverage =
      n_adj > 0 ? sum_adj / static_cast<double>(n_adj) : 1.0;
  report.weighted_coverage =
      w_total > 0 ? static_cast<double>(w_matched) / static_cast<double>(w_total) : 0.0;
  report.weighted_adjusted_coverage =
      w_den > 0 ? static_cast<double>(w_matched) / static_cast<double>(w_den) : 1.0;
  return report;
}

void write_report_json(const EvaluationReport& report,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["per_instance"] = nlohmann::ordered_json::array();
  for (const auto& s : report.per_instance) {
    nlohmann::ordered_json js;
    js["gt_id"] = s.gt_id;
    js["total_frames"] = s.total_frames;
    js["matched_frames"] = s.matched_frames;
    js["missed_seg_frames"] = s.missed_seg_frames;
    js["coverage"] = s.coverage;
    js["adjusted_coverage"] = s.adjusted_coverage;
    js["vacuous"] = s.vacuous;
    j["per_instance"].push_back(std::move(js));
  }
  j["mean_coverage"] = report.mean_coverage;
  j["mean_adjusted_coverage"] = report.mean_adjusted_coverage;
  j["weighted_coverage"] = report.weighted_coverage;
  j["weighted_adjusted_coverage"] = report.weighted_adjusted_coverage;
  j["id_mapping"] = nlohmann::ordered_json::object();
  for (const auto& [pred, gt_id] : report.id_mapping) {
    j["id_mapping"][std::to_string(pred)] = gt_id;
  }
  j["warnings"] = report.warnings;

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

void write_report_csv(const EvaluationReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "gt_id,total_frames,matched_frames,missed_seg_frames,coverage,"
         "adjusted_coverage,vacuous\n";
  char buf[160];
  for (const auto& s : report.per_instance) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.6f,%.6f,%d\n", s.gt_id,
                  s.total_frames, s.matched_frames, s.missed_seg_frames,
                  s.coverage, s.adjusted_coverage, s.vacuous ? 1 : 0);
    out << buf;
  }
}

std::string format_report_table(const EvaluationReport& report) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%6s %7s %8s %10s %9s %9s %8s\n", "gt_id",
                "frames", "matched", "missed_seg", "coverage", "adjusted",
                "vacuous");
  out << buf;
  for (const auto& s : report.per_instance) {
    std::snprintf(buf, sizeof(buf), "%6d %7d %8d %10d %9.3f %9.3f %8s\n",
                  s.gt_id, s.total_frames, s.matched_frames,
                  s.missed_seg_frames, s.coverage, s.adjusted_coverage,
                  s.vacuous ? "yes" : "");
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "mean coverage %.3f | mean adjusted coverage %.3f "
                "(vacuous instances excluded)\n",
                report.mean_coverage, report.mean_adjusted_coverage);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "frame-weighted coverage %.3f | frame-weighted adjusted %.3f\n",
                report.weighted_coverage, report.weighted_adjusted_coverage);
  out << buf;
  for (const auto& w : report.warnings) {
    out << "warning: " << w << "\n";
  }
  return out.str();
}

}  // namespace sfmseg
