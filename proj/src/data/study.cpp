#include "lnrel/study.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lnrel {

void validate_study(const Study& study) {
  const Index3& shape = study.ct.shape;
  for (const auto* grid_shape : {&study.pet.shape, &study.tumor_mask.shape, &study.lung_mask.shape}) {
    if (*grid_shape != shape) throw std::invalid_argument(study.study_id + ": volumes differ in shape");
  }
  for (const auto* grid_spacing : {&study.pet.spacing, &study.tumor_mask.spacing, &study.lung_mask.spacing}) {
    if (*grid_spacing != study.ct.spacing) throw std::invalid_argument(study.study_id + ": volumes differ in spacing");
  }
  if (foreground_count(study.tumor_mask) == 0) throw std::invalid_argument(study.study_id + ": empty tumor mask");
  if (foreground_count(study.lung_mask) == 0) throw std::invalid_argument(study.study_id + ": empty lung mask");
  if (study.candidates.empty()) throw std::invalid_argument(study.study_id + ": no candidates");
  for (std::size_t i = 0; i < study.candidates.size(); ++i) {
    const Candidate& c = study.candidates[i];
    if (c.bbox.empty() || !c.bbox.inside(shape) || !c.bbox.contains(c.center)) {
      throw std::invalid_argument(study.study_id + ": candidate " + std::to_string(i) + " bbox " + to_string(c.bbox) +
                                  " is empty, outside the volume, or misses its centre");
    }
  }
}

std::size_t positive_count(const Study& study) {
  return static_cast<std::size_t>(std::count_if(study.candidates.begin(), study.candidates.end(),
                                                [](const Candidate& c) { return c.positive(); }));
}

}  // namespace lnrel
