#include "lnrel/evaluation.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lnrel {

namespace {

std::size_t validate(std::span<const ScoredCandidate> candidates) {
  std::size_t positives = 0;
  for (const auto& c : candidates) {
    if (!std::isfinite(c.score) || c.score < 0.0 || c.score > 1.0) {
      throw std::invalid_argument("score " + std::to_string(c.score) + " outside [0, 1] for " + c.study_id);
    }
    if (c.label != 0 && c.label != 1) throw std::invalid_argument("label must be 0 or 1 for " + c.study_id);
    positives += static_cast<std::size_t>(c.label);
  }
  if (positives == 0) throw std::invalid_argument("no positive candidates: sensitivity is undefined");
  return positives;
}

// Candidates ordered by descending score.
std::vector<ScoredCandidate> by_score(std::span<const ScoredCandidate> candidates) {
  std::vector<ScoredCandidate> sorted(candidates.begin(), candidates.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score > b.score; });
  return sorted;
}

double f1_of(std::size_t tp, std::size_t fp, std::size_t positives) {
  const std::size_t denom = 2 * tp + fp + (positives - tp);
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

FrocCurve froc_curve(std::span<const ScoredCandidate> candidates, std::size_t study_count) {
  if (study_count == 0) throw std::invalid_argument("froc_curve: study_count must be at least 1");
  const std::size_t positives = validate(candidates);
  const auto sorted = by_score(candidates);
  FrocCurve curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == threshold) {
      (sorted[i].label ? tp : fp) += 1;
      ++i;
    }
    FrocPoint point{threshold, static_cast<double>(fp) / static_cast<double>(study_count),
                    static_cast<double>(tp) / static_cast<double>(positives)};
    if (!curve.points.empty() && curve.points.back().fp_per_study == point.fp_per_study) {
      curve.points.back() = point;  // same FP level, at least as sensitive
    } else {
      curve.points.push_back(point);
    }
  }
  return curve;
}

double sensitivity_at(const FrocCurve& curve, double fp_per_study) {
  double best = 0.0;
  for (const FrocPoint& p : curve.points) {
    if (p.fp_per_study <= fp_per_study) best = std::max(best, p.sensitivity);
  }
  return best;
}

double mfroc(const FrocCurve& curve, std::span<const double> fp_points) {
  if (fp_points.empty()) throw std::invalid_argument("mfroc: no FP operating points");
  double total = 0.0;
  for (double t : fp_points) total += sensitivity_at(curve, t);
  return total / static_cast<double>(fp_points.size());
}

F1Result best_f1(std::span<const ScoredCandidate> candidates) {
  const std::size_t positives = validate(candidates);
  const auto sorted = by_score(candidates);
  F1Result best;
  best.f1 = -1.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == threshold) {
      (sorted[i].label ? tp : fp) += 1;
      ++i;
    }
    const double f1 = f1_of(tp, fp, positives);
    // Thresholds descend, so a strict improvement keeps ties at the higher one.
    if (f1 > best.f1) {
      best.f1 = f1;
      best.threshold = threshold;
      best.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      best.recall = static_cast<double>(tp) / static_cast<double>(positives);
    }
  }
  return best;
}

F1Result f1_at_threshold(std::span<const ScoredCandidate> candidates, double threshold) {
  const std::size_t positives = validate(candidates);
  std::size_t tp = 0, fp = 0;
  for (const auto& c : candidates) {
    if (c.score >= threshold) (c.label ? tp : fp) += 1;
  }
  F1Result r;
  r.threshold = threshold;
  r.f1 = f1_of(tp, fp, positives);
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = static_cast<double>(tp) / static_cast<double>(positives);
  return r;
}

}  // namespace lnrel
