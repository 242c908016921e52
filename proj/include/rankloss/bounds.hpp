#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "json.hpp"
#include "rankloss/losses.hpp"
#include "rankloss/metrics.hpp"

namespace rankloss {

// Everything needed to evaluate one bounding-probability formula:
//   NCE: 1 - m (1 - |S+'|/|I|)^floor(K/m)
//   NEG: 1 - m (1 - |S+|/|I|)^floor(K/m)
//   SCE: 1 - (1/alpha) 2^m (1 - r+/|I|)^floor(alpha K / 2^m)
//   IS:  1 - 2^m (1 - r+/|I|)^floor(K / 2^m)
// m must satisfy the metric's rank condition (r+ <= 2^(2^m)-1 for NDCG,
// r+ <= 2^m for RR). With m unset the bound is maximized over admissible m.
struct BoundQuery {
  LossKind loss_kind = LossKind::SCE;  // NCE, NEG, SCE or IS
  MetricKind metric_kind = MetricKind::NDCG;
  std::uint32_t r_plus = 1;
  std::size_t catalog_size = 0;
  int negatives = 1;                   // K
  double alpha = 1.0;                  // SCE
  std::size_t s_plus_count = 0;        // |S+|, NEG
  std::size_t s_plus_prime_count = 0;  // |S+'|, NCE
  std::optional<int> m;

  nlohmann::json to_json() const;
};

// Smallest m in N satisfying the metric's rank condition.
int admissible_m(MetricKind metric, std::uint32_t r_plus);

// Value of the bound formula; m = 0 is the vacuous certainty 0 <= loss.
// Results <= 0 are returned as-is and flagged vacuous downstream.
double analytic_bound_probability(const BoundQuery& query);

struct PointwiseCheck {
  bool holds = false;      // -ln metric(r+) <= loss
  double slack = 0.0;      // loss - (-ln metric(r+))
  long xi = 0;             // the lemma's counter over the sampled items
  double loss = 0.0;
  double metric_nll = 0.0;  // -ln metric(r+), uncut
  double lemma_floor = 0.0;  // xi-based lower bound on the loss
  double floor_slack = 0.0;  // loss - lemma_floor
};

// Evaluates one sampled-loss instance against the rank defined by the full
// score vector, together with its pointwise lemma floor.
PointwiseCheck pointwise_bound_check(const LossSpec& spec, const LossInstance& instance,
                                     std::span<const double> full_scores,
                                     MetricKind metric_kind);

enum class BoundVerdict { Supported, Vacuous, Violated };
const char* bound_verdict_name(BoundVerdict verdict);

struct BoundReport {
  BoundQuery query;
  double analytic_lower = 0.0;
  double empirical = 0.0;
  long trials = 0;
  double ci_halfwidth = 0.0;  // Hoeffding, 99% confidence
  BoundVerdict holds = BoundVerdict::Vacuous;

  nlohmann::json to_json() const;
};

// Repeats: draw K items uniformly from all of I (target includable),
// compute the loss, test -ln metric(r+) <= loss. The empirical frequency is
// compared against the analytic bound.
BoundReport monte_carlo_bound_probability(std::span<const double> full_scores,
                                          std::uint32_t target, const LossSpec& spec, int k,
                                          MetricKind metric_kind, long trials,
                                          std::uint64_t seed);

// Exact P(xi >= m) for xi ~ Binomial(K, p); K <= 64.
double binomial_tail_exact(int k, double p, int m);

// The grouping bound 1 - m(1-p)^floor(K/m); never exceeds the exact tail.
double binomial_lemma_bound(int k, double p, int m);

// |SCE - IS| on the sample set {target} + negatives under the target-skewed
// proposal; identically zero up to rounding.
double sce_is_equivalence_check(double target_score, std::span<const double> negative_scores,
                                double alpha, std::size_t catalog_size);

}  // namespace rankloss
