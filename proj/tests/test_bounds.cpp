#include <cmath>
#include <vector>

#include "doctest.h"
#include "rankloss/bounds.hpp"
#include "rankloss/rng.hpp"
#include "rankloss/verification.hpp"

using namespace rankloss;

namespace {

// Independent oracle: exact binomial distribution by dynamic programming
// over trials, nothing shared with the closed-form accumulation under test.
double binomial_tail_dp(int k, double p, int m) {
  std::vector<double> dist{1.0};
  for (int trial = 0; trial < k; ++trial) {
    std::vector<double> next(dist.size() + 1, 0.0);
    for (std::size_t successes = 0; successes < dist.size(); ++successes) {
      next[successes] += dist[successes] * (1.0 - p);
      next[successes + 1] += dist[successes] * p;
    }
    dist = std::move(next);
  }
  double tail = 0.0;
  for (std::size_t successes = static_cast<std::size_t>(m); successes < dist.size();
       ++successes) {
    tail += dist[successes];
  }
  return tail;
}

}  // namespace

TEST_SUITE_BEGIN("bounds");

TEST_CASE("admissible_m follows the rank conditions") {
  CHECK(admissible_m(MetricKind::NDCG, 1) == 0);
  CHECK(admissible_m(MetricKind::RR, 1) == 0);
  CHECK(admissible_m(MetricKind::NDCG, 3) == 1);
  CHECK(admissible_m(MetricKind::NDCG, 4) == 2);
  CHECK(admissible_m(MetricKind::NDCG, 15) == 2);
  CHECK(admissible_m(MetricKind::NDCG, 16) == 3);
  CHECK(admissible_m(MetricKind::RR, 4) == 2);
  CHECK(admissible_m(MetricKind::RR, 5) == 3);
  CHECK(admissible_m(MetricKind::RR, 1u << 20) == 20);
  CHECK_THROWS_AS(admissible_m(MetricKind::NDCG, 0), std::invalid_argument);
  CHECK_THROWS_AS(admissible_m(MetricKind::HR, 3), std::invalid_argument);
}

TEST_CASE("analytic bound formulas at fixed m match hand substitution") {
  BoundQuery sce;
  sce.loss_kind = LossKind::SCE;
  sce.metric_kind = MetricKind::NDCG;
  sce.catalog_size = 100;
  sce.r_plus = 4;
  sce.alpha = 4.0;
  sce.negatives = 8;
  sce.m = 2;
  CHECK(analytic_bound_probability(sce) ==
        doctest::Approx(0.2786104210161666).epsilon(1e-12));
  // Maximizing over admissible m lands on the same value here.
  sce.m.reset();
  CHECK(analytic_bound_probability(sce) ==
        doctest::Approx(0.2786104210161666).epsilon(1e-12));

  BoundQuery nce;
  nce.loss_kind = LossKind::NCE;
  nce.metric_kind = MetricKind::NDCG;
  nce.catalog_size = 100;
  nce.r_plus = 3;  // m = 2 stays admissible (r+ <= 15)
  nce.s_plus_prime_count = 50;
  nce.negatives = 10;
  nce.m = 2;
  CHECK(analytic_bound_probability(nce) == doctest::Approx(0.9375).epsilon(1e-12));

  BoundQuery is;
  is.loss_kind = LossKind::IS;
  is.metric_kind = MetricKind::NDCG;
  is.catalog_size = 100;
  is.r_plus = 4;
  is.negatives = 8;
  is.m = 2;
  CHECK(analytic_bound_probability(is) == doctest::Approx(-2.6864).epsilon(1e-12));

  BoundQuery neg = nce;
  neg.loss_kind = LossKind::NEG;
  neg.s_plus_count = 50;
  CHECK(analytic_bound_probability(neg) == doctest::Approx(0.9375).epsilon(1e-12));
}

TEST_CASE("m below the metric condition is rejected; rank one is certain") {
  BoundQuery q;
  q.loss_kind = LossKind::SCE;
  q.metric_kind = MetricKind::NDCG;
  q.catalog_size = 100;
  q.r_plus = 4;
  q.alpha = 2.0;
  q.negatives = 16;
  q.m = 1;  // needs m >= 2 for r+ = 4
  CHECK_THROWS_AS(analytic_bound_probability(q), std::invalid_argument);

  q.m.reset();
  q.r_plus = 1;  // m = 0 admissible: probability 1
  CHECK(analytic_bound_probability(q) == 1.0);
}

TEST_CASE("pointwise check: uniform CE example and SCE equality edge") {
  LossSpec ce;
  ce.kind = LossKind::CE;
  ce.catalog_size = 4;
  LossInstance instance;
  instance.full_scores.assign(4, 0.0);
  instance.target_index = 1;
  instance.target_score = 0.0;
  const PointwiseCheck check =
      pointwise_bound_check(ce, instance, instance.full_scores, MetricKind::NDCG);
  CHECK(check.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(check.metric_nll == doctest::Approx(std::log(std::log2(5.0))).epsilon(1e-12));
  CHECK(check.holds);
  CHECK(check.slack == doctest::Approx(std::log(4.0) - 0.8423979159087749).epsilon(1e-9));

  LossSpec sce;
  sce.kind = LossKind::SCE;
  sce.alpha = 100.0;
  sce.negatives = 2;
  sce.catalog_size = 4;
  LossInstance sparse;
  sparse.target_score = 0.0;
  sparse.target_index = 1;
  sparse.negative_scores = {0.0, 0.0};
  const PointwiseCheck edge =
      pointwise_bound_check(sce, sparse, instance.full_scores, MetricKind::NDCG);
  CHECK(edge.xi == 2);
  CHECK(edge.lemma_floor == doctest::Approx(std::log(201.0)).epsilon(1e-12));
  CHECK(edge.floor_slack == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("binomial tail matches the dp oracle on a grid") {
  for (int k : {1, 2, 4, 7, 13, 20, 33, 64}) {
    for (double p : {0.0, 0.05, 0.3, 0.5, 0.77, 0.95, 1.0}) {
      for (int m = 0; m <= k; m += std::max(1, k / 7)) {
        CHECK(binomial_tail_exact(k, p, m) ==
              doctest::Approx(binomial_tail_dp(k, p, m)).epsilon(1e-10));
      }
    }
  }
  CHECK(binomial_tail_exact(4, 0.5, 2) == doctest::Approx(0.6875).epsilon(1e-12));
  CHECK(binomial_tail_exact(12, 0.3, 0) == 1.0);
  CHECK(binomial_tail_exact(5, 1.0, 5) == 1.0);
  CHECK_THROWS_AS(binomial_tail_exact(65, 0.5, 3), std::invalid_argument);
  CHECK_THROWS_AS(binomial_tail_exact(5, 0.5, 6), std::invalid_argument);
}

TEST_CASE("grouping bound stays below the exact tail everywhere") {
  CHECK(binomial_lemma_bound(4, 0.5, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(binomial_lemma_bound(10, 0.4, 0) == 1.0);
  const verify::SuiteResult result = verify::run_binomial_suite();
  CHECK(result.ok());
  CHECK(result.records[0]["checks"].get<long>() == 21 * 19 * 11);
}

TEST_CASE("sce-is equivalence on worked and random instances") {
  CHECK(sce_is_equivalence_check(0.0, std::vector<double>{0, 0}, 3.0, 5) <= 1e-12);
  CHECK(sce_is_equivalence_check(0.4, std::vector<double>{-1, 2}, 1.0, 7) <= 1e-12);
  Rng rng(61);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const double alpha = 1.0 + 99.0 * rng.uniform_real();
    const std::size_t catalog = 2 + rng.uniform_index(5000);
    std::vector<double> negs(1 + rng.uniform_index(32));
    for (double& s : negs) {
      s = rng.normal(0.0, 3.0);
    }
    const double target = rng.normal(0.0, 3.0);
    const double sce = sce_loss(target, negs, alpha);
    worst = std::max(worst,
                     sce_is_equivalence_check(target, negs, alpha, catalog) /
                         std::max(1.0, std::abs(sce)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("lemma floors hold on random instances and the mutation is caught") {
  const verify::SuiteResult good = verify::run_lemma_suite(20000, 123, false);
  CHECK(good.ok());
  const verify::SuiteResult broken = verify::run_lemma_suite(20000, 123, true);
  CHECK_FALSE(broken.ok());
}

TEST_CASE("monte carlo: degenerate all-equal scores hold on every trial") {
  const std::vector<double> scores(10, 0.7);
  LossSpec spec;
  spec.kind = LossKind::SCE;
  spec.alpha = 1.0;
  spec.negatives = 4;
  spec.catalog_size = 10;
  const BoundReport report = monte_carlo_bound_probability(
      scores, 3, spec, 4, MetricKind::NDCG, 2000, 17);
  // r+ = 10, loss = ln5 on every trial, -ln NDCG(10) = 1.241 < 1.609.
  CHECK(report.empirical == 1.0);
  CHECK(report.query.r_plus == 10);
  CHECK(report.holds != BoundVerdict::Violated);
}

TEST_CASE("monte carlo labels nonpositive analytic bounds vacuous") {
  std::vector<double> scores(100);
  for (std::size_t v = 0; v < 100; ++v) {
    scores[v] = v < 4 ? 1.0 : -8.0;  // r+ = 4 with target among the top ties
  }
  LossSpec spec;
  spec.kind = LossKind::IS;
  spec.negatives = 8;
  spec.catalog_size = 100;
  const BoundReport report = monte_carlo_bound_probability(
      scores, 0, spec, 8, MetricKind::NDCG, 2000, 18);
  CHECK(report.analytic_lower <= 0.0);
  CHECK(report.holds == BoundVerdict::Vacuous);
}

TEST_CASE("monte carlo reproduces the worked sce bound with margin") {
  // True frequency ~0.278 + extra mass from mid-scored items; the analytic
  // value is exactly the hand-computed 0.2786104.
  std::vector<double> scores(100);
  scores[0] = 2.0;
  for (std::size_t v = 1; v < 4; ++v) {
    scores[v] = 2.0 + 0.01 * static_cast<double>(v);
  }
  for (std::size_t v = 4; v < 100; ++v) {
    scores[v] = -6.0;
  }
  LossSpec spec;
  spec.kind = LossKind::SCE;
  spec.alpha = 4.0;
  spec.negatives = 8;
  spec.catalog_size = 100;
  const BoundReport report = monte_carlo_bound_probability(
      scores, 0, spec, 8, MetricKind::NDCG, 100000, 19);
  CHECK(report.analytic_lower == doctest::Approx(0.2786104210161666).epsilon(1e-12));
  CHECK(report.ci_halfwidth == doctest::Approx(0.005146997846583986).epsilon(1e-9));
  CHECK(report.empirical >= report.analytic_lower - report.ci_halfwidth);
  CHECK(report.holds == BoundVerdict::Supported);
}

TEST_CASE("identity and prop suites pass at reduced size") {
  CHECK(verify::run_identity_suite(300, 7).ok());
  CHECK(verify::run_prop_suite(500, 2000, 7).ok());
}

TEST_SUITE_END();
