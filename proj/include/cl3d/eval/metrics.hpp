#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

// Ground-plane center-distance matching thresholds, meters.
struct MatchSpec {
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};

  bool valid() const {
    if (thresholds.empty()) return false;
    double prev = 0.0;
    for (double t : thresholds) {
      if (t <= prev) return false;
      prev = t;
    }
    return true;
  }
};

// Detections and labels grouped per frame; matching never crosses frames.
struct EvalFrame {
  std::vector<Detection> detections;
  std::vector<ObjectLabel> ground_truth;
};

struct ApCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct MetricRecord {
  std::map<double, double> ap_per_threshold;  // threshold -> AP
  std::map<double, ApCounts> counts;          // at the full detection set
  double map = 0.0;
  std::optional<double> closed_gap_percent;
  bool defined = true;  // false when neither detections nor ground truth exist
};

// AP at one center-distance threshold for one class, all-point interpolation.
// Detections are matched greedily in descending score order, each to the
// nearest unmatched same-class ground-truth center within `threshold`.
// Returns nullopt when the class has neither ground truth nor detections.
std::optional<double> average_precision(const std::vector<EvalFrame>& frames, int class_id,
                                        double threshold, ApCounts* counts = nullptr);

// Mean over the spec's thresholds for one class.
MetricRecord mean_ap(const std::vector<EvalFrame>& frames, int class_id, const MatchSpec& spec);

// Fraction of the direct-transfer-to-oracle gap recovered, in percent.
// nullopt when the denominator vanishes.
std::optional<double> closed_gap(double ap_model, double ap_dt, double ap_oracle);

}  // namespace cl3d
