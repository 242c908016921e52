#include <cmath>
#include <vector>

#include "doctest.h"
#include "rankloss/losses.hpp"
#include "rankloss/math_util.hpp"
#include "rankloss/metrics.hpp"
#include "rankloss/rng.hpp"

using namespace rankloss;

namespace {

// Naive long-double evaluation of -s_+ + ln sum(exp), independent of the
// max-subtracted path used by the implementation.
double naive_ce(std::uint32_t target, const std::vector<double>& scores) {
  long double z = 0.0L;
  for (double s : scores) {
    z += std::exp(static_cast<long double>(s));
  }
  return static_cast<double>(-static_cast<long double>(scores[target]) + std::log(z));
}

std::vector<double> random_scores(Rng& rng, std::size_t n, double spread = 2.0) {
  std::vector<double> scores(n);
  for (double& s : scores) {
    s = rng.normal(0.0, spread);
  }
  return scores;
}

// Central finite difference of a scalar function of one score entry.
template <typename F>
double central_diff(F f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

bool grad_close(double analytic, double fd, double tol = 1e-4) {
  return std::abs(analytic - fd) <= tol * std::max({1.0, std::abs(analytic), std::abs(fd)});
}

LossInstance random_instance(const LossSpec& spec, Rng& rng) {
  LossInstance instance;
  if (loss_uses_full_scores(spec.kind)) {
    instance.full_scores = random_scores(rng, spec.catalog_size);
    instance.target_index = static_cast<std::uint32_t>(rng.uniform_index(spec.catalog_size));
    instance.target_score = instance.full_scores[instance.target_index];
  } else {
    const std::size_t k = static_cast<std::size_t>(spec.negatives);
    instance.target_score = rng.normal(0.0, 2.0);
    instance.negative_scores = random_scores(rng, k);
    if (spec.kind == LossKind::IS) {
      instance.proposal_logprobs.resize(k);
      double total = 0.0;
      for (double& q : instance.proposal_logprobs) {
        q = rng.uniform_real() + 0.1;
        total += q;
      }
      for (double& q : instance.proposal_logprobs) {
        q = std::log(q / total * 0.5);  // arbitrary sub-normalized proposal masses
      }
      instance.target_proposal_logprob = std::log(0.1 + 0.4 * rng.uniform_real());
    }
  }
  return instance;
}

// FD-checks d loss/d s for the target and every negative/sample entry.
void check_gradients_fd(const LossSpec& spec, LossInstance instance) {
  const ScoreGradients grads = loss_score_gradient(spec, instance);

  if (loss_uses_full_scores(spec.kind)) {
    REQUIRE(grads.others.size() == instance.full_scores.size());
    CHECK(grads.target == grads.others[instance.target_index]);
    for (std::size_t v = 0; v < instance.full_scores.size(); ++v) {
      const double fd = central_diff(
          [&](double x) {
            LossInstance probe = instance;
            probe.full_scores[v] = x;
            return loss_value(spec, probe);
          },
          instance.full_scores[v]);
      CHECK_MESSAGE(grad_close(grads.others[v], fd),
                    "kind=" << loss_kind_name(spec.kind) << " entry=" << v
                            << " analytic=" << grads.others[v] << " fd=" << fd);
    }
    return;
  }

  const double fd_target = central_diff(
      [&](double x) {
        LossInstance probe = instance;
        probe.target_score = x;
        return loss_value(spec, probe);
      },
      instance.target_score);
  CHECK_MESSAGE(grad_close(grads.target, fd_target),
                "kind=" << loss_kind_name(spec.kind) << " target analytic=" << grads.target
                        << " fd=" << fd_target);
  REQUIRE(grads.others.size() == instance.negative_scores.size());
  for (std::size_t i = 0; i < instance.negative_scores.size(); ++i) {
    const double fd = central_diff(
        [&](double x) {
          LossInstance probe = instance;
          probe.negative_scores[i] = x;
          return loss_value(spec, probe);
        },
        instance.negative_scores[i]);
    CHECK_MESSAGE(grad_close(grads.others[i], fd),
                  "kind=" << loss_kind_name(spec.kind) << " negative=" << i);
  }
}

// Retention boundaries make CE_TopN/CE_Eta only piecewise smooth; keep FD
// instances a safe margin away from the boundary.
bool truncation_margin_ok(const LossSpec& spec, const LossInstance& instance, double margin) {
  if (spec.kind != LossKind::CE_TopN && spec.kind != LossKind::CE_Eta) {
    return true;
  }
  const auto& scores = instance.full_scores;
  const double target = scores[instance.target_index];
  if (spec.kind == LossKind::CE_TopN) {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double threshold = sorted[static_cast<std::size_t>(spec.top_n - 1)];
    for (double s : scores) {
      if (s != threshold && std::abs(s - threshold) < margin) {
        return false;
      }
    }
    return true;
  }
  const double threshold = target - spec.eta * std::abs(target);
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (v != instance.target_index && std::abs(scores[v] - threshold) < margin) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("ce matches direct evaluation") {
  CHECK(ce_loss(0, std::vector<double>{0, 0, 0, 0}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(ce_loss(1, std::vector<double>{2, 1, 0}) ==
        doctest::Approx(1.4076059644443801).epsilon(1e-12));
  // Dominant target: loss collapses to ~0.
  const double tiny = ce_loss(0, std::vector<double>{10, -10, -10});
  CHECK(tiny == doctest::Approx(4.1223078284247094e-09).epsilon(1e-6));
  CHECK(tiny < 1e-8);
}

TEST_CASE("ce agrees with naive long-double oracle on random vectors") {
  Rng rng(11);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 1 + rng.uniform_index(100);
    const auto scores = random_scores(rng, n, 5.0);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    CHECK(ce_loss(target, scores) == doctest::Approx(naive_ce(target, scores)).epsilon(1e-11));
  }
}

TEST_CASE("ce rejects bad input") {
  CHECK_THROWS_AS(ce_loss(0, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(ce_loss(3, std::vector<double>{0, 0, 0}), std::out_of_range);
  CHECK_THROWS_AS(ce_loss(0, std::vector<double>{std::nan(""), 0.0}), std::invalid_argument);
}

TEST_CASE("ce_topn worked examples") {
  const std::vector<double> scores{2, 1, 0};
  CHECK(ce_topn_loss(1, scores, 3) == ce_loss(1, scores));
  const double at2 = ce_topn_loss(1, scores, 2);
  CHECK(at2 == doctest::Approx(1.3132616875182226).epsilon(1e-12));
  // The truncated loss still dominates -ln NDCG at r+ = 2.
  CHECK(at2 >= std::log(std::log2(3.0)));
  CHECK(std::log(std::log2(3.0)) == doctest::Approx(0.4605607481983633).epsilon(1e-12));
  // Unique maximum target with n = 1 retains only the target.
  CHECK(ce_topn_loss(0, scores, 1) == 0.0);
}

TEST_CASE("ce_topn keeps boundary tie groups whole") {
  // Ties at the n-th score are retained with it.
  const std::vector<double> scores{5, 5, 3};
  CHECK(ce_topn_loss(2, scores, 1) ==
        doctest::Approx(-3 + std::log(2 * std::exp(5.0) + std::exp(3.0))).epsilon(1e-12));
  // Target outside the top-n set is still included.
  const std::vector<double> low{5, 4, 0};
  CHECK(ce_topn_loss(2, low, 1) ==
        doctest::Approx(0 + std::log(std::exp(5.0) + 1.0)).epsilon(1e-12));
}

TEST_CASE("ce_eta worked examples") {
  const std::vector<double> scores{2, 1, 0};
  CHECK(ce_eta_loss(1, scores, 0.0) == doctest::Approx(1.3132616875182226).epsilon(1e-12));
  CHECK(ce_eta_loss(1, scores, 0.0) == ce_topn_loss(1, scores, 2));
  CHECK(ce_eta_loss(1, scores, 10.0) == doctest::Approx(ce_loss(1, scores)).epsilon(1e-12));
  // s_+ = 0 degenerates to the threshold s_v >= 0 regardless of eta.
  const std::vector<double> zero_target{-1, 0, 1};
  CHECK(ce_eta_loss(1, zero_target, 0.0) == ce_eta_loss(1, zero_target, 7.0));
}

TEST_CASE("monotone retention in n and eta, bounded by ce") {
  Rng rng(12);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 2 + rng.uniform_index(30);
    const auto scores = random_scores(rng, n);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    const double full = ce_loss(target, scores);

    double prev = 0.0;
    for (int j = 1; j <= static_cast<int>(n); ++j) {
      const double value = ce_topn_loss(target, scores, j);
      CHECK(value >= prev - 1e-12);
      CHECK(value <= full + 1e-12);
      prev = value;
    }
    CHECK(ce_topn_loss(target, scores, static_cast<int>(n)) ==
          doctest::Approx(full).epsilon(1e-12));

    prev = 0.0;
    for (double eta : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0, 1e6}) {
      const double value = ce_eta_loss(target, scores, eta);
      CHECK(value >= prev - 1e-12);
      CHECK(value <= full + 1e-12);
      prev = value;
    }
  }
}

TEST_CASE("bce and bpr worked examples") {
  CHECK(bce_loss(0, 0) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(1, -1) == doctest::Approx(0.6265233750364457).epsilon(1e-12));
  CHECK(bce_loss(60, -60) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bpr_loss(1, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bpr_loss(2, 0) == doctest::Approx(0.1269280110429725).epsilon(1e-12));
  CHECK(bpr_loss(7, 5) == doctest::Approx(bpr_loss(2, 0)).epsilon(1e-12));
}

TEST_CASE("nce correction and loss") {
  // c = ln(|I|/K) cancels exactly into the raw score.
  CHECK(nce_corrected_score(1.5, std::log(100.0 / 10.0), 10, 100) ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(nce_corrected_score(0.0, 10.0, 10, 100) ==
        doctest::Approx(-7.697414907005955).epsilon(1e-12));
  CHECK(nce_corrected_score(3.0, 0.0, 100, 100) == doctest::Approx(3.0).epsilon(1e-12));

  const std::vector<double> negs(10, 0.0);
  CHECK(nce_loss(0.0, negs, 10.0, 100) == doctest::Approx(7.702407765988331).epsilon(1e-12));
  const std::vector<double> one(1, 0.0);
  CHECK(nce_loss(0.0, one, std::log(4.0 / 1.0), 4) ==
        doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("neg loss and its identities") {
  const std::vector<double> one(1, 0.0);
  CHECK(neg_loss(0.0, one) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  for (std::size_t k : {1u, 3u, 8u}) {
    const std::vector<double> negs(k, 0.0);
    CHECK(neg_loss(0.0, negs) ==
          doctest::Approx((k + 1) * std::log(2.0)).epsilon(1e-12));
    CHECK(neg_loss(0.0, negs) >= static_cast<double>(k) * std::log(2.0));
  }
  // One negative: identical formula to BCE.
  Rng rng(13);
  for (int it = 0; it < 50; ++it) {
    const double t = rng.normal(0, 2), n = rng.normal(0, 2);
    CHECK(neg_loss(t, std::vector<double>{n}) == bce_loss(t, n));
  }
}

TEST_CASE("nce equals neg at c = ln(|I|/K) on random instances") {
  Rng rng(14);
  for (int it = 0; it < 1000; ++it) {
    const std::size_t catalog = 2 + rng.uniform_index(999);
    const std::size_t k = 1 + rng.uniform_index(64);
    const double t = rng.normal(0, 2);
    const auto negs = random_scores(rng, k);
    const double c = std::log(static_cast<double>(catalog) / static_cast<double>(k));
    CHECK(nce_loss(t, negs, c, catalog) ==
          doctest::Approx(neg_loss(t, negs)).epsilon(1e-9));
  }
}

TEST_CASE("is loss worked examples") {
  const double log_u = std::log(1.0 / 5.0);
  // Uniform proposal cancels: softmax over two equal entries.
  CHECK(is_loss(0.0, log_u, std::vector<double>{0, 0}, std::vector<double>{log_u, log_u}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Degenerate single-sample normalizer.
  CHECK(is_loss(0.7, log_u, std::vector<double>{0.7}, std::vector<double>{log_u}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // Skewed proposal, |I|=5, alpha=3: ln 7.
  const double lq_target = std::log(3.0 / 7.0);
  const double lq_other = std::log(1.0 / 7.0);
  CHECK(is_loss(0.0, lq_target, std::vector<double>{0, 0, 0},
                std::vector<double>{lq_target, lq_other, lq_other}) ==
        doctest::Approx(1.9459101490553132).epsilon(1e-12));
}

TEST_CASE("sce loss worked examples") {
  CHECK(sce_loss(0.0, std::vector<double>{0, 0}, 100.0) ==
        doctest::Approx(5.303304908059076).epsilon(1e-12));
  CHECK(sce_loss(0.0, std::vector<double>{0, 0}, 3.0) ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
  // alpha = 1 over every non-target item once reproduces CE.
  Rng rng(15);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 2 + rng.uniform_index(60);
    const auto scores = random_scores(rng, n);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    std::vector<double> rest;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != target) rest.push_back(scores[v]);
    }
    CHECK(sce_loss(scores[target], rest, 1.0) ==
          doctest::Approx(ce_loss(target, scores)).epsilon(1e-9));
  }
}

TEST_CASE("shift invariance holds exactly where the algebra says so") {
  Rng rng(16);
  for (double shift : {0.5, -3.0, 7.25}) {
    for (int it = 0; it < 50; ++it) {
      const std::size_t n = 3 + rng.uniform_index(30);
      auto scores = random_scores(rng, n);
      const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
      auto shifted = scores;
      for (double& s : shifted) s += shift;

      CHECK(std::abs(ce_loss(target, shifted) - ce_loss(target, scores)) <= 1e-9);
      // Same retained set under a common shift (the rank order is unchanged),
      // so CE-n is invariant too.
      CHECK(std::abs(ce_topn_loss(target, shifted, 2) - ce_topn_loss(target, scores, 2)) <=
            1e-9);

      std::vector<double> negs(scores.begin() + 1, scores.end());
      std::vector<double> shifted_negs(shifted.begin() + 1, shifted.end());
      CHECK(std::abs(bpr_loss(shifted[0], shifted_negs[0]) - bpr_loss(scores[0], negs[0])) <=
            1e-9);
      CHECK(std::abs(sce_loss(shifted[0], shifted_negs, 7.0) -
                     sce_loss(scores[0], negs, 7.0)) <= 1e-9);

      const double log_u = -std::log(static_cast<double>(n));
      const std::vector<double> lq(negs.size(), log_u);
      CHECK(std::abs(is_loss(shifted[0], log_u, shifted_negs, lq) -
                     is_loss(scores[0], log_u, negs, lq)) <= 1e-9);
    }
  }
}

TEST_CASE("bce, neg and nce are not shift invariant: witness exists") {
  // A witness shift must move the loss; one explicit instance suffices.
  const double t = 0.3, n = -0.4, shift = 2.0;
  CHECK(std::abs(bce_loss(t + shift, n + shift) - bce_loss(t, n)) > 1e-3);
  const std::vector<double> negs{n, 0.1};
  const std::vector<double> shifted{n + shift, 0.1 + shift};
  CHECK(std::abs(neg_loss(t + shift, shifted) - neg_loss(t, negs)) > 1e-3);
  CHECK(std::abs(nce_loss(t + shift, shifted, 1.0, 50) - nce_loss(t, negs, 1.0, 50)) > 1e-3);
}

TEST_CASE("nonnegativity of every kind except is") {
  Rng rng(17);
  for (int it = 0; it < 500; ++it) {
    const std::size_t n = 2 + rng.uniform_index(40);
    const auto scores = random_scores(rng, n, 4.0);
    const auto target = static_cast<std::uint32_t>(rng.uniform_index(n));
    std::vector<double> negs(scores.begin() + 1, scores.end());
    CHECK(ce_loss(target, scores) >= 0.0);
    CHECK(ce_topn_loss(target, scores, 1 + static_cast<int>(rng.uniform_index(n))) >= -1e-15);
    CHECK(ce_eta_loss(target, scores, 3.0 * rng.uniform_real()) >= -1e-15);
    CHECK(bce_loss(scores[0], scores[1]) >= 0.0);
    CHECK(bpr_loss(scores[0], scores[1]) >= 0.0);
    CHECK(neg_loss(scores[0], negs) >= 0.0);
    CHECK(nce_loss(scores[0], negs, rng.normal(0, 4), n) >= 0.0);
    CHECK(sce_loss(scores[0], negs, 1.0 + 50 * rng.uniform_real()) >= 0.0);
  }
}

TEST_CASE("loss spec json round trip") {
  LossSpec spec;
  spec.kind = LossKind::SCE;
  spec.alpha = 100.0;
  spec.negatives = 500;
  const auto j = spec.to_json();
  CHECK(j.dump() == R"({"K":500,"alpha":100.0,"kind":"SCE"})");
  const LossSpec back = LossSpec::from_json(j);
  CHECK(back.kind == LossKind::SCE);
  CHECK(back.alpha == 100.0);
  CHECK(back.negatives == 500);
  CHECK_THROWS_AS(LossSpec::from_json(nlohmann::json{{"kind", "XXX"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LossSpec::from_json(nlohmann::json{{"kind", "SCE"}, {"alpha", 0.5}}),
                  std::invalid_argument);
}

TEST_CASE("gradient of ce at uniform scores") {
  LossSpec spec;
  spec.kind = LossKind::CE;
  spec.catalog_size = 5;
  LossInstance instance;
  instance.full_scores.assign(5, 1.3);
  instance.target_index = 2;
  instance.target_score = 1.3;
  const ScoreGradients g = loss_score_gradient(spec, instance);
  CHECK(g.target == doctest::Approx(-1.0 + 0.2).epsilon(1e-12));
  for (std::size_t v = 0; v < 5; ++v) {
    if (v != 2) {
      CHECK(g.others[v] == doctest::Approx(0.2).epsilon(1e-12));
    }
  }
}

TEST_CASE("sce gradients sum to zero over target and negatives") {
  Rng rng(18);
  LossSpec spec;
  spec.kind = LossKind::SCE;
  spec.catalog_size = 1000;
  for (int it = 0; it < 100; ++it) {
    spec.alpha = 1.0 + 99.0 * rng.uniform_real();
    spec.negatives = 1 + static_cast<int>(rng.uniform_index(32));
    const LossInstance instance = random_instance(spec, rng);
    const ScoreGradients g = loss_score_gradient(spec, instance);
    double total = g.target;
    for (double x : g.others) {
      total += x;
    }
    CHECK(std::abs(total) <= 1e-12);
  }
}

TEST_CASE("every loss kind matches central finite differences on 100 seeds") {
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);

    for (LossKind kind : {LossKind::CE, LossKind::CE_TopN, LossKind::CE_Eta, LossKind::BCE,
                          LossKind::BPR, LossKind::NCE, LossKind::NEG, LossKind::IS,
                          LossKind::SCE}) {
      LossSpec spec;
      spec.kind = kind;
      spec.catalog_size = 3 + rng.uniform_index(30);
      spec.negatives = loss_uses_full_scores(kind) || kind == LossKind::BCE ||
                               kind == LossKind::BPR
                           ? 1
                           : 1 + static_cast<int>(rng.uniform_index(16));
      spec.top_n = 1 + static_cast<int>(rng.uniform_index(spec.catalog_size));
      spec.eta = 2.0 * rng.uniform_real();
      spec.c = rng.normal(0.0, 3.0);
      spec.alpha = 1.0 + 50.0 * rng.uniform_real();

      LossInstance instance = random_instance(spec, rng);
      // Keep FD probes away from retention boundaries where the truncated
      // losses are non-differentiable.
      int guard = 0;
      while (!truncation_margin_ok(spec, instance, 1e-3) && guard++ < 100) {
        instance = random_instance(spec, rng);
      }
      REQUIRE(guard < 100);
      check_gradients_fd(spec, instance);
    }
  }
}

TEST_SUITE_END();
