#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace lnrel {

struct ScoredCandidate {
  std::string study_id;
  double score = 0.0;  // in [0, 1]
  int label = 0;       // 0 or 1
};

struct FrocPoint {
  double threshold = 0.0;  // candidates with score >= threshold are called positive
  double fp_per_study = 0.0;
  double sensitivity = 0.0;
};

// Operating points sorted by fp_per_study; both coordinates non-decreasing.
struct FrocCurve {
  std::vector<FrocPoint> points;
};

inline constexpr std::array<double, 4> kDefaultFrocPoints{2.0, 3.0, 4.0, 6.0};

// Sweeps every distinct score as a threshold, highest first. Sensitivity is
// pooled over all studies. Throws when there are no positives.
FrocCurve froc_curve(std::span<const ScoredCandidate> candidates, std::size_t study_count);

// Best sensitivity reachable with at most `fp_per_study` false positives per
// study; 0 when no operating point qualifies.
double sensitivity_at(const FrocCurve& curve, double fp_per_study);

// Mean of sensitivity_at over fp_points.
double mfroc(const FrocCurve& curve, std::span<const double> fp_points = kDefaultFrocPoints);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Maximum F1 over the distinct-score thresholds; ties go to the higher one.
F1Result best_f1(std::span<const ScoredCandidate> candidates);
F1Result f1_at_threshold(std::span<const ScoredCandidate> candidates, double threshold);

}  // namespace lnrel
