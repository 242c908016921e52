#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace rankloss {

struct ScorerParams;
struct SequenceDataset;

enum class MetricKind { NDCG, RR, HR };

// r+ counts every item scoring >= the target, target included; 1 is best.
struct RankResult {
  std::uint32_t rank = 0;
  std::uint32_t tied_count = 0;  // items scoring exactly the target's score
};

RankResult rank_of_target(std::span<const double> scores, std::uint32_t target_index);

// NDCG = 1/log2(1+r+), RR = 1/r+, HR = 1; zero when a cutoff is given and
// r+ exceeds it.
double metric_value(MetricKind kind, std::uint32_t r_plus,
                    std::optional<std::uint32_t> cutoff = std::nullopt);

struct CutoffMetrics {
  int k = 0;
  double ndcg = 0.0;
  double hr = 0.0;
  double mrr = 0.0;
};

struct MetricReport {
  std::vector<CutoffMetrics> at;  // one entry per requested cutoff
  std::size_t user_count = 0;

  const CutoffMetrics& cutoff(int k) const;  // throws if k absent
  nlohmann::json to_json() const;
};

enum class EvalSplit { Validation, Test };

// Full-catalog scoring per user, averaged in user order. Validation users
// see their training prefix; test users additionally see the validation
// item. History is truncated to the most recent max_history items
// (0 = unlimited).
MetricReport evaluate_scorer(const ScorerParams& params, const SequenceDataset& dataset,
                             EvalSplit split, std::span<const int> cutoffs,
                             std::size_t max_history);

}  // namespace rankloss
