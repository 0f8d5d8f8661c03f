#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lnrel/spatial_priors.h"
#include "lnrel/study.h"

namespace lnrel {

// A study together with the spatial prior of each of its candidates.
struct PreparedStudy {
  const Study* study = nullptr;
  std::vector<SpatialPrior> priors;

  std::size_t size() const { return study->candidates.size(); }
  std::vector<double> labels() const;
};

PreparedStudy prepare_study(const Study& study);
std::vector<PreparedStudy> prepare_studies(const std::vector<const Study*>& studies);

// Ratio #negatives / #positives; throws unless both classes are present.
double balanced_positive_weight(const std::vector<PreparedStudy>& studies);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_f1 = 0.0;
  int optimizer_steps = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainReport {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_f1 = 0.0;
  double initial_loss = 0.0;  // mean training loss before any update
  int optimizer_steps = 0;
};

}  // namespace lnrel
