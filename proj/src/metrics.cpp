#include "rankloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rankloss/dataset.hpp"
#include "rankloss/math_util.hpp"
#include "rankloss/scorer.hpp"

namespace rankloss {

RankResult rank_of_target(std::span<const double> scores, std::uint32_t target_index) {
  if (target_index >= scores.size()) {
    throw std::out_of_range("rank_of_target: target index out of range");
  }
  if (!all_finite(scores)) {
    throw std::invalid_argument("rank_of_target: non-finite score");
  }
  const double target = scores[target_index];
  RankResult result;
  for (double s : scores) {
    if (s >= target) {
      ++result.rank;
    }
    if (s == target) {
      ++result.tied_count;
    }
  }
  return result;
}

double metric_value(MetricKind kind, std::uint32_t r_plus, std::optional<std::uint32_t> cutoff) {
  if (r_plus < 1) {
    throw std::invalid_argument("metric_value: rank must be >= 1");
  }
  if (cutoff && r_plus > *cutoff) {
    return 0.0;
  }
  switch (kind) {
    case MetricKind::NDCG:
      return 1.0 / std::log2(1.0 + static_cast<double>(r_plus));
    case MetricKind::RR:
      return 1.0 / static_cast<double>(r_plus);
    case MetricKind::HR:
      return 1.0;
  }
  throw std::logic_error("metric_value: unreachable");
}

const CutoffMetrics& MetricReport::cutoff(int k) const {
  for (const auto& row : at) {
    if (row.k == k) {
      return row;
    }
  }
  throw std::out_of_range("metric report has no cutoff " + std::to_string(k));
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : at) {
    rows.push_back({{"k", row.k},
                    {"ndcg", row.ndcg},
                    {"hr", row.hr},
                    {"mrr", row.mrr},
                    {"users", user_count}});
  }
  return rows;
}

MetricReport evaluate_scorer(const ScorerParams& params, const SequenceDataset& dataset,
                             EvalSplit split, std::span<const int> cutoffs,
                             std::size_t max_history) {
  if (dataset.user_count() == 0) {
    throw std::invalid_argument("evaluate_scorer: empty dataset");
  }
  MetricReport report;
  report.user_count = dataset.user_count();
  report.at.resize(cutoffs.size());
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    if (cutoffs[c] < 1) {
      throw std::invalid_argument("evaluate_scorer: cutoffs must be >= 1");
    }
    report.at[c].k = cutoffs[c];
  }

  // Users are stored in ascending id order; accumulating in storage order
  // keeps the reduction deterministic.
  for (std::size_t u = 0; u < dataset.user_count(); ++u) {
    const auto history =
        split == EvalSplit::Validation ? dataset.train_prefix(u) : dataset.test_history(u);
    const std::uint32_t target =
        split == EvalSplit::Validation ? dataset.val_target(u) : dataset.test_target(u);
    const HistoryState state = pool_history(history, params, max_history);
    const std::vector<double> scores = score_all(state, params);
    const std::uint32_t r_plus = rank_of_target(scores, target).rank;
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const auto k = static_cast<std::uint32_t>(cutoffs[c]);
      report.at[c].ndcg += metric_value(MetricKind::NDCG, r_plus, k);
      report.at[c].hr += metric_value(MetricKind::HR, r_plus, k);
      report.at[c].mrr += metric_value(MetricKind::RR, r_plus, k);
    }
  }
  const double n = static_cast<double>(report.user_count);
  for (auto& row : report.at) {
    row.ndcg /= n;
    row.hr /= n;
    row.mrr /= n;
  }
  return report;
}

}  // namespace rankloss
