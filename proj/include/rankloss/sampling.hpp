#pragma once

#include <cstdint>
#include <vector>

#include "rankloss/rng.hpp"

namespace rankloss {

struct SamplerConfig {
  int negatives = 1;            // K
  bool include_target = false;  // bound verification wants true, training false
  bool replacement = true;
  std::uint64_t seed = 0;

  void validate(std::size_t catalog_size) const;  // throws std::invalid_argument
};

// Uniform draws over I (include_target) or I\{target}. i.i.d. when
// replacement is on, distinct otherwise.
std::vector<std::uint32_t> sample_uniform_negatives(const SamplerConfig& config,
                                                    std::size_t catalog_size,
                                                    std::uint32_t target, Rng& rng);

// The target-skewed categorical that makes IS coincide with SCE:
// mass alpha/(|I|-1+alpha) on the target, 1/(|I|-1+alpha) elsewhere.
struct ProposalDistribution {
  std::uint32_t target_index = 0;
  double target_mass = 0.0;
  double other_mass = 0.0;
  std::size_t catalog_size = 0;
};

ProposalDistribution build_sce_proposal(double alpha, std::size_t catalog_size,
                                        std::uint32_t target);

struct ProposalSample {
  std::vector<std::uint32_t> indices;
  std::vector<double> logprobs;  // ln(mass) of each drawn index
};

ProposalSample sample_from_proposal(const ProposalDistribution& dist, int k, Rng& rng);

}  // namespace rankloss
