#include "lnrel/dataset.h"

#include <stdexcept>

namespace lnrel {

std::vector<double> PreparedStudy::labels() const {
  std::vector<double> out;
  out.reserve(size());
  for (const Candidate& c : study->candidates) out.push_back(c.positive() ? 1.0 : 0.0);
  return out;
}

PreparedStudy prepare_study(const Study& study) {
  PreparedStudy prepared;
  prepared.study = &study;
  const StudyGeometry geometry = study_geometry(study);
  prepared.priors.reserve(study.candidates.size());
  for (const Candidate& c : study.candidates) prepared.priors.push_back(assemble_prior(c, geometry));
  return prepared;
}

std::vector<PreparedStudy> prepare_studies(const std::vector<const Study*>& studies) {
  std::vector<PreparedStudy> out;
  out.reserve(studies.size());
  for (const Study* s : studies) out.push_back(prepare_study(*s));
  return out;
}

double balanced_positive_weight(const std::vector<PreparedStudy>& studies) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : studies) {
    for (const Candidate& c : s.study->candidates) (c.positive() ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw std::invalid_argument("training data must contain both positive and negative candidates");
  return static_cast<double>(neg) / static_cast<double>(pos);
}

}  // namespace lnrel
