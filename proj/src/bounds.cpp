#include "rankloss/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rankloss/math_util.hpp"
#include "rankloss/rng.hpp"
#include "rankloss/sampling.hpp"

namespace rankloss {

namespace {

constexpr int kMaxM = 40;

// Largest rank covered by a given m, saturated so the comparison never
// overflows: NDCG allows r+ <= 2^(2^m) - 1, RR allows r+ <= 2^m.
std::uint64_t rank_ceiling(MetricKind metric, int m) {
  if (metric == MetricKind::RR) {
    if (m >= 63) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    return 1ULL << m;
  }
  if (m >= 6) {  // 2^(2^6) - 1 already exceeds any 64-bit rank
    return std::numeric_limits<std::uint64_t>::max();
  }
  const unsigned shift = 1U << m;
  if (shift >= 64) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return (1ULL << shift) - 1ULL;
}

}  // namespace

int admissible_m(MetricKind metric, std::uint32_t r_plus) {
  if (r_plus < 1) {
    throw std::invalid_argument("admissible_m: rank must be >= 1");
  }
  if (metric == MetricKind::HR) {
    throw std::invalid_argument("admissible_m: bound theorems cover NDCG and RR only");
  }
  for (int m = 0; m <= kMaxM; ++m) {
    if (static_cast<std::uint64_t>(r_plus) <= rank_ceiling(metric, m)) {
      return m;
    }
  }
  throw std::logic_error("admissible_m: no admissible m below cap");
}

nlohmann::json BoundQuery::to_json() const {
  nlohmann::json j{{"loss", loss_kind_name(loss_kind)},
                   {"metric", metric_kind == MetricKind::NDCG ? "NDCG" : "RR"},
                   {"r_plus", r_plus},
                   {"catalog_size", catalog_size},
                   {"K", negatives}};
  if (loss_kind == LossKind::SCE) {
    j["alpha"] = alpha;
  }
  if (loss_kind == LossKind::NEG) {
    j["s_plus_count"] = s_plus_count;
  }
  if (loss_kind == LossKind::NCE) {
    j["s_plus_prime_count"] = s_plus_prime_count;
  }
  if (m) {
    j["m"] = *m;
  }
  return j;
}

namespace {

double bound_at_m(const BoundQuery& q, int m) {
  if (m == 0) {
    // All four losses are nonnegative, so 0 <= loss holds surely.
    return 1.0;
  }
  const double size = static_cast<double>(q.catalog_size);
  switch (q.loss_kind) {
    case LossKind::NCE: {
      const double p = static_cast<double>(q.s_plus_prime_count) / size;
      const double exponent = static_cast<double>(q.negatives / m);
      return 1.0 - static_cast<double>(m) * std::pow(1.0 - p, exponent);
    }
    case LossKind::NEG: {
      const double p = static_cast<double>(q.s_plus_count) / size;
      const double exponent = static_cast<double>(q.negatives / m);
      return 1.0 - static_cast<double>(m) * std::pow(1.0 - p, exponent);
    }
    case LossKind::SCE: {
      const double p = static_cast<double>(q.r_plus) / size;
      const double two_m = std::pow(2.0, static_cast<double>(m));
      const double exponent = std::floor(q.alpha * static_cast<double>(q.negatives) / two_m);
      return 1.0 - (two_m / q.alpha) * std::pow(1.0 - p, exponent);
    }
    case LossKind::IS: {
      const double p = static_cast<double>(q.r_plus) / size;
      const double two_m = std::pow(2.0, static_cast<double>(m));
      const double exponent = std::floor(static_cast<double>(q.negatives) / two_m);
      return 1.0 - two_m * std::pow(1.0 - p, exponent);
    }
    default:
      throw std::invalid_argument("analytic bound: loss kind has no theorem");
  }
}

}  // namespace

double analytic_bound_probability(const BoundQuery& query) {
  if (query.catalog_size < 1 || query.negatives < 1) {
    throw std::invalid_argument("analytic bound: need |I| >= 1 and K >= 1");
  }
  if (query.r_plus < 1 || query.r_plus > query.catalog_size) {
    throw std::invalid_argument("analytic bound: rank out of range");
  }
  if (query.s_plus_count > query.catalog_size || query.s_plus_prime_count > query.catalog_size) {
    throw std::invalid_argument("analytic bound: set size exceeds catalog");
  }
  const int m_min = admissible_m(query.metric_kind, query.r_plus);
  if (query.m) {
    if (*query.m < m_min || *query.m > kMaxM) {
      throw std::invalid_argument("analytic bound: m violates the metric condition");
    }
    return bound_at_m(query, *query.m);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int m = m_min; m <= kMaxM; ++m) {
    best = std::max(best, bound_at_m(query, m));
  }
  return best;
}

PointwiseCheck pointwise_bound_check(const LossSpec& spec, const LossInstance& instance,
                                     std::span<const double> full_scores,
                                     MetricKind metric_kind) {
  PointwiseCheck check;
  check.loss = loss_value(spec, instance);
  const std::uint32_t r_plus = rank_of_target(full_scores, instance.target_index).rank;
  check.metric_nll = -std::log(metric_value(metric_kind, r_plus));
  check.holds = check.metric_nll <= check.loss;
  check.slack = check.loss - check.metric_nll;

  const double ln2 = std::log(2.0);
  switch (spec.kind) {
    case LossKind::NCE: {
      const int k = static_cast<int>(instance.negative_scores.size());
      for (double s : instance.negative_scores) {
        if (nce_corrected_score(s, spec.c, k, spec.catalog_size) >= 0.0) {
          ++check.xi;
        }
      }
      check.lemma_floor = static_cast<double>(check.xi) * ln2;
      break;
    }
    case LossKind::NEG: {
      for (double s : instance.negative_scores) {
        if (s >= 0.0) {
          ++check.xi;
        }
      }
      check.lemma_floor = static_cast<double>(check.xi) * ln2;
      break;
    }
    case LossKind::SCE: {
      for (double s : instance.negative_scores) {
        if (s >= instance.target_score) {
          ++check.xi;
        }
      }
      check.lemma_floor = std::log1p(spec.alpha * static_cast<double>(check.xi));
      break;
    }
    case LossKind::IS: {
      for (double s : instance.negative_scores) {
        if (s >= instance.target_score) {
          ++check.xi;
        }
      }
      check.lemma_floor = check.xi > 0 ? std::log(static_cast<double>(check.xi))
                                       : -std::numeric_limits<double>::infinity();
      break;
    }
    default:
      // CE-family losses are nonnegative and bounded below by zero; no xi.
      check.lemma_floor = 0.0;
      break;
  }
  check.floor_slack = check.loss - check.lemma_floor;
  return check;
}

const char* bound_verdict_name(BoundVerdict verdict) {
  switch (verdict) {
    case BoundVerdict::Supported: return "supported";
    case BoundVerdict::Vacuous: return "vacuous";
    case BoundVerdict::Violated: return "violated";
  }
  return "?";
}

nlohmann::json BoundReport::to_json() const {
  return nlohmann::json{{"query", query.to_json()},
                        {"analytic", analytic_lower},
                        {"empirical", empirical},
                        {"trials", trials},
                        {"ci", ci_halfwidth},
                        {"verdict", bound_verdict_name(holds)}};
}

BoundReport monte_carlo_bound_probability(std::span<const double> full_scores,
                                          std::uint32_t target, const LossSpec& spec, int k,
                                          MetricKind metric_kind, long trials,
                                          std::uint64_t seed) {
  if (trials < 1000) {
    throw std::invalid_argument("monte carlo: need at least 1e3 trials");
  }
  if (target >= full_scores.size()) {
    throw std::out_of_range("monte carlo: target index out of range");
  }
  const std::size_t catalog = full_scores.size();
  const std::uint32_t r_plus = rank_of_target(full_scores, target).rank;

  BoundQuery query;
  query.loss_kind = spec.kind;
  query.metric_kind = metric_kind;
  query.r_plus = r_plus;
  query.catalog_size = catalog;
  query.negatives = k;
  query.alpha = spec.alpha;
  for (double s : full_scores) {
    if (s >= 0.0) {
      ++query.s_plus_count;
    }
    if (nce_corrected_score(s, spec.c, k, catalog) >= 0.0) {
      ++query.s_plus_prime_count;
    }
  }

  const double metric_nll = -std::log(metric_value(metric_kind, r_plus));
  const double target_score = full_scores[target];
  const double log_uniform = -std::log(static_cast<double>(catalog));

  LossSpec trial_spec = spec;
  trial_spec.catalog_size = catalog;
  trial_spec.negatives = k;

  long held = 0;
  std::vector<double> sample_scores(static_cast<std::size_t>(k));
  std::vector<double> logprobs(static_cast<std::size_t>(k), log_uniform);
  for (long trial = 0; trial < trials; ++trial) {
    // The theorems sample from all of I, so the target is includable.
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(trial));
    for (int i = 0; i < k; ++i) {
      sample_scores[static_cast<std::size_t>(i)] =
          full_scores[rng.uniform_index(catalog)];
    }
    double loss = 0.0;
    switch (spec.kind) {
      case LossKind::NCE:
        loss = nce_loss(target_score, sample_scores, spec.c, catalog);
        break;
      case LossKind::NEG:
        loss = neg_loss(target_score, sample_scores);
        break;
      case LossKind::SCE:
        loss = sce_loss(target_score, sample_scores, spec.alpha);
        break;
      case LossKind::IS:
        loss = is_loss(target_score, log_uniform, sample_scores, logprobs);
        break;
      default:
        throw std::invalid_argument("monte carlo: loss kind has no theorem");
    }
    if (metric_nll <= loss) {
      ++held;
    }
  }

  BoundReport report;
  report.query = query;
  report.analytic_lower = analytic_bound_probability(query);
  report.trials = trials;
  report.empirical = static_cast<double>(held) / static_cast<double>(trials);
  // Hoeffding at 99% confidence: sqrt(ln(2/delta) / 2n).
  report.ci_halfwidth = std::sqrt(std::log(2.0 / 0.01) / (2.0 * static_cast<double>(trials)));
  if (report.analytic_lower <= 0.0) {
    report.holds = BoundVerdict::Vacuous;
  } else if (report.empirical >= report.analytic_lower - report.ci_halfwidth) {
    report.holds = BoundVerdict::Supported;
  } else {
    report.holds = BoundVerdict::Violated;
  }
  return report;
}

double binomial_tail_exact(int k, double p, int m) {
  if (k < 0 || k > 64) {
    throw std::invalid_argument("binomial_tail_exact: K must be in [0, 64]");
  }
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("binomial_tail_exact: p must be in [0, 1]");
  }
  if (m < 0 || m > k) {
    throw std::invalid_argument("binomial_tail_exact: m must be in [0, K]");
  }
  if (m == 0) {
    return 1.0;
  }
  if (p == 0.0) {
    return 0.0;  // m >= 1 but no successes possible
  }
  if (p == 1.0) {
    return 1.0;  // all K trials succeed and m <= K
  }
  // P(xi >= m) = 1 - sum_{j<m} C(K,j) p^j (1-p)^(K-j), accumulated via the
  // term recurrence t_{j+1} = t_j * (K-j)/(j+1) * p/(1-p).
  double term = std::pow(1.0 - p, k);
  double cdf = term;
  for (int j = 0; j + 1 < m; ++j) {
    term *= static_cast<double>(k - j) / static_cast<double>(j + 1) * (p / (1.0 - p));
    cdf += term;
  }
  return std::max(0.0, 1.0 - cdf);
}

double binomial_lemma_bound(int k, double p, int m) {
  if (m < 0 || m > k) {
    throw std::invalid_argument("binomial_lemma_bound: m must be in [0, K]");
  }
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("binomial_lemma_bound: p must be in [0, 1]");
  }
  if (m == 0) {
    return 1.0;
  }
  return 1.0 - static_cast<double>(m) *
                   std::pow(1.0 - p, static_cast<double>(k / m));
}

double sce_is_equivalence_check(double target_score, std::span<const double> negative_scores,
                                double alpha, std::size_t catalog_size) {
  const double sce = sce_loss(target_score, negative_scores, alpha);
  const ProposalDistribution dist = build_sce_proposal(alpha, catalog_size, 0);

  std::vector<double> sample_scores;
  std::vector<double> sample_logprobs;
  sample_scores.reserve(negative_scores.size() + 1);
  sample_logprobs.reserve(negative_scores.size() + 1);
  sample_scores.push_back(target_score);
  sample_logprobs.push_back(std::log(dist.target_mass));
  for (double s : negative_scores) {
    sample_scores.push_back(s);
    sample_logprobs.push_back(std::log(dist.other_mass));
  }
  const double is =
      is_loss(target_score, std::log(dist.target_mass), sample_scores, sample_logprobs);
  return std::abs(sce - is);
}

}  // namespace rankloss
