#include "rankloss/verification.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rankloss/bounds.hpp"
#include "rankloss/losses.hpp"
#include "rankloss/math_util.hpp"
#include "rankloss/metrics.hpp"
#include "rankloss/rng.hpp"

namespace rankloss::verify {

namespace {

constexpr double kIdentityTol = 1e-9;   // relative
constexpr double kFloorTol = 1e-9;      // absolute guard at equality edges

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Scores around a random center with a random spread; occasionally
// quantized so exact ties get exercised.
std::vector<double> random_scores(Rng& rng, std::size_t n) {
  const double center = -2.0 + 4.0 * rng.uniform_real();
  const double spread = 0.1 + 2.9 * rng.uniform_real();
  const bool quantize = rng.uniform_real() < 0.25;
  std::vector<double> scores(n);
  for (double& s : scores) {
    s = rng.normal(center, spread);
    if (quantize) {
      s = std::round(s * 2.0) / 2.0;
    }
  }
  return scores;
}

nlohmann::json identity_record(const std::string& name, long instances, long violations,
                               double max_diff) {
  return nlohmann::json{{"suite", "identities"},
                        {"identity", name},
                        {"instances", instances},
                        {"violations", violations},
                        {"max_rel_diff", max_diff},
                        {"verdict", violations == 0 ? "supported" : "violated"}};
}

}  // namespace

void SuiteResult::merge(const SuiteResult& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
  violations += other.violations;
}

SuiteResult run_identity_suite(long instances, std::uint64_t seed) {
  SuiteResult result;
  Rng rng = Rng::derive(seed, 0x1d10);

  long bad_sce_ce = 0, bad_nce_neg = 0, bad_sce_is = 0, bad_eta_topn = 0, bad_topn_ce = 0;
  double d_sce_ce = 0, d_nce_neg = 0, d_sce_is = 0, d_eta_topn = 0, d_topn_ce = 0;

  for (long it = 0; it < instances; ++it) {
    const std::size_t n = 2 + rng.uniform_index(63);
    const std::vector<double> scores = random_scores(rng, n);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));

    // SCE(alpha=1) over every non-target item once == CE.
    std::vector<double> non_target;
    non_target.reserve(n - 1);
    for (std::size_t v = 0; v < n; ++v) {
      if (v != target) {
        non_target.push_back(scores[v]);
      }
    }
    const double ce = ce_loss(target, scores);
    if (!non_target.empty()) {
      const double sce = sce_loss(scores[target], non_target, 1.0);
      const double diff = std::abs(sce - ce) / std::max(1.0, std::abs(ce));
      d_sce_ce = std::max(d_sce_ce, diff);
      if (!close_rel(sce, ce, kIdentityTol)) {
        ++bad_sce_ce;
      }
    }

    // NCE at c = ln(|I|/K) == NEG.
    {
      const std::size_t k = 1 + rng.uniform_index(64);
      std::vector<double> negs(k);
      for (double& s : negs) {
        s = rng.normal(0.0, 2.0);
      }
      const double t = rng.normal(0.0, 2.0);
      const double c = std::log(static_cast<double>(n) / static_cast<double>(k));
      const double nce = nce_loss(t, negs, c, n);
      const double neg = neg_loss(t, negs);
      d_nce_neg = std::max(d_nce_neg, std::abs(nce - neg) / std::max(1.0, std::abs(neg)));
      if (!close_rel(nce, neg, kIdentityTol)) {
        ++bad_nce_neg;
      }
    }

    // SCE == IS under the target-skewed proposal.
    if (!non_target.empty()) {
      const double alpha = 1.0 + 99.0 * rng.uniform_real();
      const double diff =
          sce_is_equivalence_check(scores[target], non_target, alpha, n);
      const double sce = sce_loss(scores[target], non_target, alpha);
      d_sce_is = std::max(d_sce_is, diff / std::max(1.0, std::abs(sce)));
      if (diff > kIdentityTol * std::max(1.0, std::abs(sce))) {
        ++bad_sce_is;
      }
    }

    // eta = 0 truncation == top-n truncation at n = r+.
    {
      const std::uint32_t r_plus = rank_of_target(scores, target).rank;
      const double eta0 = ce_eta_loss(target, scores, 0.0);
      const double topn = ce_topn_loss(target, scores, static_cast<int>(r_plus));
      d_eta_topn = std::max(d_eta_topn, std::abs(eta0 - topn));
      if (eta0 != topn) {
        ++bad_eta_topn;
      }
    }

    // Full retention == CE.
    {
      const double topn = ce_topn_loss(target, scores, static_cast<int>(n));
      d_topn_ce = std::max(d_topn_ce, std::abs(topn - ce));
      if (!close_rel(topn, ce, kIdentityTol)) {
        ++bad_topn_ce;
      }
    }
  }

  result.records.push_back(identity_record("SCE(alpha=1,all-non-target)==CE", instances,
                                           bad_sce_ce, d_sce_ce));
  result.records.push_back(
      identity_record("NCE(c=ln(|I|/K))==NEG", instances, bad_nce_neg, d_nce_neg));
  result.records.push_back(
      identity_record("SCE==IS(skewed proposal)", instances, bad_sce_is, d_sce_is));
  result.records.push_back(
      identity_record("CE_eta(0)==CE_topn(r+)", instances, bad_eta_topn, d_eta_topn));
  result.records.push_back(
      identity_record("CE_topn(|I|)==CE", instances, bad_topn_ce, d_topn_ce));
  result.violations =
      bad_sce_ce + bad_nce_neg + bad_sce_is + bad_eta_topn + bad_topn_ce;
  return result;
}

SuiteResult run_prop_suite(long truncation_vectors, long ce_vectors, std::uint64_t seed) {
  SuiteResult result;
  Rng rng = Rng::derive(seed, 0x9209);
  constexpr double kSlackTol = 1e-12;

  long trunc_violations = 0;
  long trunc_checks = 0;
  for (long it = 0; it < truncation_vectors; ++it) {
    const std::size_t n = 2 + rng.uniform_index(63);
    const std::vector<double> scores = random_scores(rng, n);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    const std::uint32_t r_plus = rank_of_target(scores, target).rank;
    const double ndcg_nll = -std::log(metric_value(MetricKind::NDCG, r_plus));
    const double rr_nll = -std::log(metric_value(MetricKind::RR, r_plus));
    for (std::uint32_t v = r_plus; v <= n; ++v) {
      const double loss = ce_topn_loss(target, scores, static_cast<int>(v));
      ++trunc_checks;
      if (ndcg_nll > loss + kSlackTol || rr_nll > loss + kSlackTol) {
        ++trunc_violations;
      }
    }
  }
  result.records.push_back(nlohmann::json{{"suite", "props"},
                                          {"property", "CE-n bounds NDCG and RR for n>=r+"},
                                          {"vectors", truncation_vectors},
                                          {"checks", trunc_checks},
                                          {"violations", trunc_violations},
                                          {"verdict", trunc_violations == 0 ? "supported"
                                                                            : "violated"}});

  long ce_violations = 0;
  for (long it = 0; it < ce_vectors; ++it) {
    const std::size_t n = 2 + rng.uniform_index(63);
    const std::vector<double> scores = random_scores(rng, n);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    const std::uint32_t r_plus = rank_of_target(scores, target).rank;
    const double loss = ce_loss(target, scores);
    if (-std::log(metric_value(MetricKind::NDCG, r_plus)) > loss + kSlackTol ||
        -std::log(metric_value(MetricKind::RR, r_plus)) > loss + kSlackTol) {
      ++ce_violations;
    }
  }
  result.records.push_back(nlohmann::json{{"suite", "props"},
                                          {"property", "CE bounds NDCG and RR unconditionally"},
                                          {"vectors", ce_vectors},
                                          {"violations", ce_violations},
                                          {"verdict", ce_violations == 0 ? "supported"
                                                                         : "violated"}});
  result.violations = trunc_violations + ce_violations;
  return result;
}

SuiteResult run_lemma_suite(long instances_per_kind, std::uint64_t seed, bool mutate_sce) {
  SuiteResult result;
  Rng rng = Rng::derive(seed, 0x1e44a);
  const double ln2 = std::log(2.0);

  struct Row {
    const char* name;
    long violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
  };
  Row nce_row{"NCE >= xi1 ln2"};
  Row neg_row{"NEG >= xi2 ln2"};
  Row sce_row{"SCE >= ln(1+alpha xi3)"};
  Row is_row{"IS(uniform) >= ln xi4 when xi4 >= 1"};

  for (long it = 0; it < instances_per_kind; ++it) {
    const std::size_t catalog = 10 + rng.uniform_index(191);
    const std::size_t k = 1 + rng.uniform_index(64);
    const double t = rng.normal(0.0, 2.0);
    std::vector<double> negs(k);
    for (double& s : negs) {
      s = rng.normal(0.0, 2.0);
    }

    {
      const double c = -2.0 + 14.0 * rng.uniform_real();
      long xi = 0;
      for (double s : negs) {
        if (nce_corrected_score(s, c, static_cast<int>(k), catalog) >= 0.0) {
          ++xi;
        }
      }
      const double slack =
          nce_loss(t, negs, c, catalog) - static_cast<double>(xi) * ln2;
      nce_row.min_slack = std::min(nce_row.min_slack, slack);
      if (slack < -kFloorTol) {
        ++nce_row.violations;
      }
    }
    {
      long xi = 0;
      for (double s : negs) {
        if (s >= 0.0) {
          ++xi;
        }
      }
      const double slack = neg_loss(t, negs) - static_cast<double>(xi) * ln2;
      neg_row.min_slack = std::min(neg_row.min_slack, slack);
      if (slack < -kFloorTol) {
        ++neg_row.violations;
      }
    }
    {
      const double alpha = 1.0 + 199.0 * rng.uniform_real();
      long xi = 0;
      for (double s : negs) {
        if (s >= t) {
          ++xi;
        }
      }
      // The mutation drops the alpha scale from the loss (a classic
      // implementation slip) while the floor keeps it.
      const double loss = sce_loss(t, negs, mutate_sce ? 1.0 : alpha);
      const double slack = loss - std::log1p(alpha * static_cast<double>(xi));
      sce_row.min_slack = std::min(sce_row.min_slack, slack);
      if (slack < -kFloorTol) {
        ++sce_row.violations;
      }
    }
    {
      const double log_q = -std::log(static_cast<double>(catalog));
      std::vector<double> logprobs(negs.size(), log_q);
      long xi = 0;
      for (double s : negs) {
        if (s >= t) {
          ++xi;
        }
      }
      if (xi >= 1) {
        const double slack =
            is_loss(t, log_q, negs, logprobs) - std::log(static_cast<double>(xi));
        is_row.min_slack = std::min(is_row.min_slack, slack);
        if (slack < -kFloorTol) {
          ++is_row.violations;
        }
      }
    }
  }

  for (const Row& row : {nce_row, neg_row, sce_row, is_row}) {
    result.records.push_back(nlohmann::json{{"suite", "lemmas"},
                                            {"lemma", row.name},
                                            {"instances", instances_per_kind},
                                            {"violations", row.violations},
                                            {"min_slack", row.min_slack},
                                            {"verdict", row.violations == 0 ? "supported"
                                                                            : "violated"}});
    result.violations += row.violations;
  }
  return result;
}

SuiteResult run_binomial_suite() {
  SuiteResult result;
  long violations = 0;
  long checks = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 20; ++k) {
    for (int m = 0; m <= k; ++m) {
      for (int pi = 1; pi <= 19; ++pi) {
        const double p = 0.05 * pi;
        const double exact = binomial_tail_exact(k, p, m);
        const double lemma = binomial_lemma_bound(k, p, m);
        ++checks;
        min_gap = std::min(min_gap, exact - lemma);
        if (lemma > exact + 1e-12) {
          ++violations;
        }
      }
    }
  }
  result.records.push_back(nlohmann::json{{"suite", "binomial"},
                                          {"grid", "K<=20, 0<=m<=K, p in {0.05..0.95}"},
                                          {"checks", checks},
                                          {"violations", violations},
                                          {"min_gap", min_gap},
                                          {"verdict", violations == 0 ? "supported"
                                                                      : "violated"}});
  result.violations = violations;
  return result;
}

namespace {

struct TheoremConfig {
  LossKind loss;
  MetricKind metric;
  std::size_t catalog;
  std::uint32_t r_plus;
  int k;
  double alpha = 1.0;   // SCE
  double c = 1.0;       // NCE
  std::size_t mid_count;  // items between 0 and the target score
};

// Deterministic score layout: target 2.0 at index 0, r+-1 items strictly
// above, mid_count items in (0, 2), the rest well below zero. This pins
// r+, |S+| and |S+'| by construction.
std::vector<double> theorem_scores(const TheoremConfig& config, std::uint32_t* target_out) {
  std::vector<double> scores(config.catalog);
  scores[0] = 2.0;
  std::size_t v = 1;
  for (std::uint32_t i = 1; i < config.r_plus; ++i, ++v) {
    scores[v] = 2.0 + 0.01 * static_cast<double>(i);
  }
  for (std::size_t i = 0; i < config.mid_count; ++i, ++v) {
    scores[v] = 0.5 + 0.9 * (static_cast<double>(i) /
                             std::max<std::size_t>(1, config.mid_count));
  }
  for (; v < config.catalog; ++v) {
    scores[v] = -6.0 + 0.002 * static_cast<double>(v);
  }
  *target_out = 0;
  return scores;
}

const std::vector<TheoremConfig>& theorem_grid() {
  static const std::vector<TheoremConfig> grid = {
      // NCE: bound driven by |S+'| = #{s >= c + ln(K/|I|)}
      {LossKind::NCE, MetricKind::NDCG, 100, 3, 16, 1.0, 1.0, 50},
      {LossKind::NCE, MetricKind::RR, 100, 3, 16, 1.0, 1.0, 50},
      {LossKind::NCE, MetricKind::NDCG, 200, 2, 24, 1.0, 0.5, 60},
      {LossKind::NCE, MetricKind::RR, 150, 4, 32, 1.0, 1.0, 60},
      {LossKind::NCE, MetricKind::NDCG, 100, 1, 8, 1.0, 2.0, 30},
      // NEG: bound driven by |S+| = #{s >= 0}
      {LossKind::NEG, MetricKind::NDCG, 100, 3, 12, 1.0, 1.0, 47},
      {LossKind::NEG, MetricKind::RR, 100, 3, 16, 1.0, 1.0, 47},
      {LossKind::NEG, MetricKind::NDCG, 200, 2, 20, 1.0, 1.0, 80},
      {LossKind::NEG, MetricKind::RR, 120, 4, 40, 1.0, 1.0, 44},
      {LossKind::NEG, MetricKind::NDCG, 100, 1, 6, 1.0, 1.0, 40},
      // SCE: bound driven by r+/|I|; includes the worked 0.2786104 case
      {LossKind::SCE, MetricKind::NDCG, 100, 4, 8, 4.0, 1.0, 20},
      {LossKind::SCE, MetricKind::RR, 100, 4, 8, 4.0, 1.0, 20},
      {LossKind::SCE, MetricKind::NDCG, 100, 10, 16, 8.0, 1.0, 10},
      {LossKind::SCE, MetricKind::RR, 50, 8, 24, 16.0, 1.0, 5},
      {LossKind::SCE, MetricKind::NDCG, 100, 1, 4, 8.0, 1.0, 10},
      // IS with uniform proposal: bound driven by r+/|I|
      {LossKind::IS, MetricKind::NDCG, 50, 10, 32, 1.0, 1.0, 5},
      {LossKind::IS, MetricKind::RR, 20, 4, 32, 1.0, 1.0, 3},
      {LossKind::IS, MetricKind::NDCG, 10, 2, 16, 1.0, 1.0, 2},
      {LossKind::IS, MetricKind::RR, 10, 2, 24, 1.0, 1.0, 2},
      {LossKind::IS, MetricKind::NDCG, 40, 12, 48, 1.0, 1.0, 4},
  };
  return grid;
}

}  // namespace

SuiteResult run_theorem_suite(long trials, std::uint64_t seed) {
  SuiteResult result;
  std::uint64_t stream = 0;
  for (const TheoremConfig& config : theorem_grid()) {
    std::uint32_t target = 0;
    const std::vector<double> scores = theorem_scores(config, &target);

    LossSpec spec;
    spec.kind = config.loss;
    spec.alpha = config.alpha;
    spec.c = config.c;
    spec.negatives = config.k;
    spec.catalog_size = config.catalog;

    const BoundReport report = monte_carlo_bound_probability(
        scores, target, spec, config.k, config.metric, trials,
        splitmix64(seed + 1000 * stream));
    ++stream;
    result.records.push_back(report.to_json());
    if (report.holds == BoundVerdict::Violated) {
      ++result.violations;
    }
  }
  return result;
}

SuiteResult run_suite(const std::string& name, long trials, std::uint64_t seed,
                      bool mutate_sce) {
  SuiteResult result;
  const bool all = name == "all";
  bool matched = false;
  if (all || name == "identities") {
    result.merge(run_identity_suite(std::min<long>(trials, 100000), seed));
    matched = true;
  }
  if (all || name == "props") {
    result.merge(run_prop_suite(std::min<long>(trials, 10000), trials, seed));
    matched = true;
  }
  if (all || name == "lemmas") {
    result.merge(run_lemma_suite(trials, seed, mutate_sce));
    matched = true;
  }
  if (all || name == "binomial") {
    result.merge(run_binomial_suite());
    matched = true;
  }
  if (all || name == "theorems") {
    result.merge(run_theorem_suite(trials, seed));
    matched = true;
  }
  if (!matched) {
    throw std::invalid_argument("unknown suite: " + name);
  }
  return result;
}

}  // namespace rankloss::verify
