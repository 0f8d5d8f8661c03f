#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lnrel/geometry.h"
#include "lnrel/volume.h"

namespace lnrel {

enum class CandidateLabel : std::uint8_t { false_positive = 0, true_node = 1 };

struct Candidate {
  Index3 center{0, 0, 0};
  Box3 bbox;
  CandidateLabel label = CandidateLabel::false_positive;
  std::optional<int> pathway_id;

  bool positive() const { return label == CandidateLabel::true_node; }
  bool operator==(const Candidate&) const = default;
};

struct Study {
  std::string study_id;
  std::uint64_t seed = 0;
  Volume3D ct;
  Volume3D pet;
  BinaryMask tumor_mask;
  BinaryMask lung_mask;
  std::vector<Candidate> candidates;

  const Index3& shape() const { return ct.shape; }
  const Vec3& spacing() const { return ct.spacing; }
  bool operator==(const Study&) const = default;
};

// Throws std::invalid_argument naming the first violated invariant: shared
// shape/spacing, non-empty tumor and lung masks, at least one candidate, and
// every bbox inside the volume and containing its centre.
void validate_study(const Study& study);

std::size_t positive_count(const Study& study);

}  // namespace lnrel
