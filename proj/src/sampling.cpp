#include "rankloss/sampling.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rankloss {

void SamplerConfig::validate(std::size_t catalog_size) const {
  if (negatives < 1) {
    throw std::invalid_argument("sampler: K must be >= 1");
  }
  if (catalog_size < 1) {
    throw std::invalid_argument("sampler: empty catalog");
  }
  if (!replacement) {
    const std::size_t candidates = include_target ? catalog_size : catalog_size - 1;
    if (static_cast<std::size_t>(negatives) > candidates) {
      throw std::invalid_argument("sampler: K exceeds candidate pool without replacement");
    }
  }
  if (!include_target && catalog_size < 2) {
    throw std::invalid_argument("sampler: no candidates besides the target");
  }
}

namespace {

// Draw over I\{target} by shrinking the range and shifting past the target.
std::uint32_t draw_excluding(std::size_t catalog_size, std::uint32_t target, Rng& rng) {
  const std::uint64_t r = rng.uniform_index(catalog_size - 1);
  return static_cast<std::uint32_t>(r >= target ? r + 1 : r);
}

}  // namespace

std::vector<std::uint32_t> sample_uniform_negatives(const SamplerConfig& config,
                                                    std::size_t catalog_size,
                                                    std::uint32_t target, Rng& rng) {
  config.validate(catalog_size);
  if (target >= catalog_size) {
    throw std::out_of_range("sampler: target index out of range");
  }
  std::vector<std::uint32_t> out;
  out.reserve(static_cast<std::size_t>(config.negatives));

  if (config.replacement) {
    for (int i = 0; i < config.negatives; ++i) {
      out.push_back(config.include_target
                        ? static_cast<std::uint32_t>(rng.uniform_index(catalog_size))
                        : draw_excluding(catalog_size, target, rng));
    }
    return out;
  }

  // Floyd's sampling: K distinct values without materializing the pool.
  const std::size_t pool = config.include_target ? catalog_size : catalog_size - 1;
  const std::size_t k = static_cast<std::size_t>(config.negatives);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(k * 2);
  for (std::uint64_t j = pool - k; j < pool; ++j) {
    const std::uint64_t t = rng.uniform_index(j + 1);
    const std::uint64_t pick = seen.insert(t).second ? t : j;
    if (pick != t) {
      seen.insert(pick);
    }
    out.push_back(config.include_target
                      ? static_cast<std::uint32_t>(pick)
                      : static_cast<std::uint32_t>(pick >= target ? pick + 1 : pick));
  }
  return out;
}

ProposalDistribution build_sce_proposal(double alpha, std::size_t catalog_size,
                                        std::uint32_t target) {
  if (alpha < 1.0) {
    throw std::invalid_argument("proposal: alpha must be >= 1");
  }
  if (catalog_size < 1 || target >= catalog_size) {
    throw std::invalid_argument("proposal: bad catalog/target");
  }
  ProposalDistribution dist;
  dist.target_index = target;
  dist.catalog_size = catalog_size;
  const double denom = static_cast<double>(catalog_size) - 1.0 + alpha;
  dist.target_mass = alpha / denom;
  dist.other_mass = 1.0 / denom;
  return dist;
}

ProposalSample sample_from_proposal(const ProposalDistribution& dist, int k, Rng& rng) {
  if (k < 1) {
    throw std::invalid_argument("proposal: K must be >= 1");
  }
  ProposalSample sample;
  sample.indices.reserve(static_cast<std::size_t>(k));
  sample.logprobs.reserve(static_cast<std::size_t>(k));
  const double log_target = std::log(dist.target_mass);
  const double log_other = std::log(dist.other_mass);
  for (int i = 0; i < k; ++i) {
    if (rng.uniform_real() < dist.target_mass) {
      sample.indices.push_back(dist.target_index);
      sample.logprobs.push_back(log_target);
    } else {
      sample.indices.push_back(draw_excluding(dist.catalog_size, dist.target_index, rng));
      sample.logprobs.push_back(log_other);
    }
  }
  return sample;
}

}  // namespace rankloss
