#include "cl3d/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cl3d/error.hpp"

namespace cl3d {
namespace {

struct ScoredHit {
  double score;
  bool tp;
  // stable tie-break: frame index, then detection index within the frame
  int frame;
  int index;
};

// Greedy one-to-one matching inside one frame. Detections visit in
// descending score order; each claims the nearest unmatched ground truth of
// its class within `threshold` (distance ties go to the lowest GT index).
void match_frame(const EvalFrame& frame, int frame_idx, int class_id, double threshold,
                 std::vector<ScoredHit>& hits, int& gt_count, int& matched_gt) {
  std::vector<int> det_order;
  for (int i = 0; i < static_cast<int>(frame.detections.size()); ++i)
    if (frame.detections[i].class_id == class_id) det_order.push_back(i);
  std::stable_sort(det_order.begin(), det_order.end(), [&](int a, int b) {
    return frame.detections[a].score > frame.detections[b].score;
  });

  std::vector<int> gt_ids;
  for (int i = 0; i < static_cast<int>(frame.ground_truth.size()); ++i)
    if (frame.ground_truth[i].class_id == class_id) gt_ids.push_back(i);
  gt_count += static_cast<int>(gt_ids.size());

  std::vector<bool> taken(gt_ids.size(), false);
  for (int di : det_order) {
    const auto& det = frame.detections[di];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(gt_ids.size()); ++k) {
      if (taken[k]) continue;
      const auto& gt = frame.ground_truth[gt_ids[k]].box;
      const double dx = det.center.x() - gt.center.x();
      const double dy = det.center.y() - gt.center.y();
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    const bool is_tp = best >= 0 && best_d <= threshold;
    if (is_tp) {
      taken[best] = true;
      ++matched_gt;
    }
    hits.push_back(ScoredHit{det.score, is_tp, frame_idx, di});
  }
}

}  // namespace

std::optional<double> average_precision(const std::vector<EvalFrame>& frames, int class_id,
                                        double threshold, ApCounts* counts) {
  if (threshold < 0.0) throw Error("bad-threshold", std::to_string(threshold));

  std::vector<ScoredHit> hits;
  int gt_count = 0;
  int matched = 0;
  for (int f = 0; f < static_cast<int>(frames.size()); ++f)
    match_frame(frames[f], f, class_id, threshold, hits, gt_count, matched);

  if (counts) {
    counts->tp = matched;
    counts->fp = static_cast<int>(hits.size()) - matched;
    counts->fn = gt_count - matched;
  }

  if (gt_count == 0 && hits.empty()) return std::nullopt;
  if (gt_count == 0) return 0.0;
  if (hits.empty()) return 0.0;

  std::stable_sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  // precision/recall after each detection, then the precision envelope
  std::vector<double> precision(hits.size()), recall(hits.size());
  int tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i].tp) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
  }
  for (int i = static_cast<int>(hits.size()) - 2; i >= 0; --i)
    precision[i] = std::max(precision[i], precision[i + 1]);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MetricRecord mean_ap(const std::vector<EvalFrame>& frames, int class_id, const MatchSpec& spec) {
  if (!spec.valid()) throw Error("bad-threshold", "thresholds must be positive and increasing");
  MetricRecord rec;
  double sum = 0.0;
  int defined = 0;
  for (double t : spec.thresholds) {
    ApCounts c;
    const auto ap = average_precision(frames, class_id, t, &c);
    rec.counts[t] = c;
    if (ap) {
      rec.ap_per_threshold[t] = *ap;
      sum += *ap;
      ++defined;
    }
  }
  if (defined == 0) {
    rec.defined = false;
    rec.map = 0.0;
  } else {
    rec.map = sum / static_cast<double>(defined);
  }
  return rec;
}

std::optional<double> closed_gap(double ap_model, double ap_dt, double ap_oracle) {
  const double denom = ap_oracle - ap_dt;
  if (denom == 0.0) return std::nullopt;
  return 100.0 * (ap_model - ap_dt) / denom;
}

}  // namespace cl3d
