#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace rankloss::verify {

struct SuiteResult {
  std::vector<nlohmann::json> records;  // one per checked configuration
  long violations = 0;

  bool ok() const { return violations == 0; }
  void merge(const SuiteResult& other);
};

// Exact algebraic identities between loss family members (1e-9 relative).
SuiteResult run_identity_suite(long instances, std::uint64_t seed);

// Rank-truncation bounds: -ln NDCG/RR <= CE-n for all n >= r+, and the
// unconditional CE bound.
SuiteResult run_prop_suite(long truncation_vectors, long ce_vectors, std::uint64_t seed);

// Pointwise loss floors xi1 ln2, xi2 ln2, ln(1+alpha xi3), ln xi4.
// mutate_sce deliberately evaluates SCE without its alpha scale so the
// harness can be shown to catch a broken implementation.
SuiteResult run_lemma_suite(long instances_per_kind, std::uint64_t seed, bool mutate_sce);

// Grouping bound vs exact binomial tail on the exhaustive small grid.
SuiteResult run_binomial_suite();

// Monte-Carlo verification of the bounding probabilities on a fixed grid of
// non-vacuous configurations.
SuiteResult run_theorem_suite(long trials, std::uint64_t seed);

SuiteResult run_suite(const std::string& name, long trials, std::uint64_t seed,
                      bool mutate_sce);  // name in {identities, props, lemmas,
                                         // binomial, theorems, all}

}  // namespace rankloss::verify
