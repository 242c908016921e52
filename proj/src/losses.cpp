#include "rankloss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rankloss/math_util.hpp"

namespace rankloss {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  if (!all_finite(xs)) {
    throw std::invalid_argument(std::string(what) + ": non-finite score");
  }
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(what) + ": non-finite score");
  }
}

void require_index(std::uint32_t index, std::size_t size, const char* what) {
  if (index >= size) {
    throw std::out_of_range(std::string(what) + ": target index out of range");
  }
}

// Score threshold realizing the top-n retention rule: the n-th largest score,
// counted with multiplicity. Items tying with it are retained whole.
double topn_threshold(std::span<const double> scores, int n) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + (n - 1), sorted.end(), std::greater<>());
  return sorted[static_cast<std::size_t>(n - 1)];
}

}  // namespace

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "CE";
    case LossKind::CE_TopN: return "CE_TopN";
    case LossKind::CE_Eta: return "CE_Eta";
    case LossKind::BCE: return "BCE";
    case LossKind::BPR: return "BPR";
    case LossKind::NCE: return "NCE";
    case LossKind::NEG: return "NEG";
    case LossKind::IS: return "IS";
    case LossKind::SCE: return "SCE";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "CE") return LossKind::CE;
  if (name == "CE_TopN") return LossKind::CE_TopN;
  if (name == "CE_Eta") return LossKind::CE_Eta;
  if (name == "BCE") return LossKind::BCE;
  if (name == "BPR") return LossKind::BPR;
  if (name == "NCE") return LossKind::NCE;
  if (name == "NEG") return LossKind::NEG;
  if (name == "IS") return LossKind::IS;
  if (name == "SCE") return LossKind::SCE;
  throw std::invalid_argument("unknown loss kind: " + name);
}

bool loss_uses_full_scores(LossKind kind) {
  return kind == LossKind::CE || kind == LossKind::CE_TopN || kind == LossKind::CE_Eta;
}

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::CE_TopN:
      if (top_n < 1) throw std::invalid_argument("CE_TopN: n must be >= 1");
      if (catalog_size > 0 && static_cast<std::size_t>(top_n) > catalog_size) {
        throw std::invalid_argument("CE_TopN: n must be <= |I|");
      }
      break;
    case LossKind::CE_Eta:
      if (eta < 0.0) throw std::invalid_argument("CE_Eta: eta must be >= 0");
      break;
    case LossKind::SCE:
      if (alpha < 1.0) throw std::invalid_argument("SCE: alpha must be >= 1");
      break;
    case LossKind::NCE:
      if (!std::isfinite(c)) throw std::invalid_argument("NCE: c must be finite");
      break;
    case LossKind::BCE:
    case LossKind::BPR:
      if (negatives != 1) throw std::invalid_argument("BCE/BPR: exactly one negative");
      break;
    default:
      break;
  }
  if (!loss_uses_full_scores(kind) && negatives < 1) {
    throw std::invalid_argument("sampled losses need K >= 1");
  }
}

nlohmann::json LossSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = loss_kind_name(kind);
  switch (kind) {
    case LossKind::CE_TopN: j["n"] = top_n; break;
    case LossKind::CE_Eta: j["eta"] = eta; break;
    case LossKind::NCE:
      j["c"] = c;
      j["K"] = negatives;
      break;
    case LossKind::SCE:
      j["alpha"] = alpha;
      j["K"] = negatives;
      break;
    case LossKind::NEG:
    case LossKind::IS:
      j["K"] = negatives;
      break;
    default:
      break;
  }
  return j;
}

LossSpec LossSpec::from_json(const nlohmann::json& j) {
  LossSpec spec;
  spec.kind = loss_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("n")) spec.top_n = j.at("n").get<int>();
  if (j.contains("eta")) spec.eta = j.at("eta").get<double>();
  if (j.contains("c")) spec.c = j.at("c").get<double>();
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  if (j.contains("K")) spec.negatives = j.at("K").get<int>();
  spec.validate();
  return spec;
}

double ce_loss(std::uint32_t target_index, std::span<const double> scores) {
  if (scores.empty()) {
    throw std::invalid_argument("ce_loss: empty score vector");
  }
  require_index(target_index, scores.size(), "ce_loss");
  require_finite(scores, "ce_loss");
  return -scores[target_index] + log_sum_exp(scores);
}

double ce_topn_loss(std::uint32_t target_index, std::span<const double> scores, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > scores.size()) {
    throw std::invalid_argument("ce_topn_loss: n must be in [1, |I|]");
  }
  require_index(target_index, scores.size(), "ce_topn_loss");
  require_finite(scores, "ce_topn_loss");

  const double threshold = topn_threshold(scores, n);
  const double target = scores[target_index];
  std::vector<double> retained;
  retained.reserve(scores.size());
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (scores[v] >= threshold || v == target_index) {
      retained.push_back(scores[v]);
    }
  }
  return -target + log_sum_exp(retained);
}

double ce_eta_loss(std::uint32_t target_index, std::span<const double> scores, double eta) {
  if (eta < 0.0) {
    throw std::invalid_argument("ce_eta_loss: eta must be >= 0");
  }
  require_index(target_index, scores.size(), "ce_eta_loss");
  require_finite(scores, "ce_eta_loss");

  const double target = scores[target_index];
  const double threshold = target - eta * std::abs(target);
  std::vector<double> retained;
  retained.reserve(scores.size());
  for (double s : scores) {
    if (s >= threshold) {
      retained.push_back(s);
    }
  }
  // The target meets its own threshold with equality, so `retained` is
  // never empty.
  return -target + log_sum_exp(retained);
}

double bce_loss(double target_score, double negative_score) {
  require_finite(target_score, "bce_loss");
  require_finite(negative_score, "bce_loss");
  return softplus(-target_score) + softplus(negative_score);
}

double bpr_loss(double target_score, double negative_score) {
  require_finite(target_score, "bpr_loss");
  require_finite(negative_score, "bpr_loss");
  return softplus(negative_score - target_score);
}

double nce_corrected_score(double score, double c, int k, std::size_t catalog_size) {
  if (k < 1 || catalog_size < 1) {
    throw std::invalid_argument("nce_corrected_score: K and |I| must be >= 1");
  }
  return score - c - std::log(static_cast<double>(k) / static_cast<double>(catalog_size));
}

double nce_loss(double target_score, std::span<const double> negative_scores, double c,
                std::size_t catalog_size) {
  if (negative_scores.empty()) {
    throw std::invalid_argument("nce_loss: negatives must be non-empty");
  }
  require_finite(target_score, "nce_loss");
  require_finite(negative_scores, "nce_loss");
  const int k = static_cast<int>(negative_scores.size());
  double acc = softplus(-nce_corrected_score(target_score, c, k, catalog_size));
  for (double s : negative_scores) {
    acc += softplus(nce_corrected_score(s, c, k, catalog_size));
  }
  return acc;
}

double neg_loss(double target_score, std::span<const double> negative_scores) {
  if (negative_scores.empty()) {
    throw std::invalid_argument("neg_loss: negatives must be non-empty");
  }
  require_finite(target_score, "neg_loss");
  require_finite(negative_scores, "neg_loss");
  double acc = softplus(-target_score);
  for (double s : negative_scores) {
    acc += softplus(s);
  }
  return acc;
}

double is_loss(double target_score, double target_proposal_logprob,
               std::span<const double> sample_scores,
               std::span<const double> sample_proposal_logprobs) {
  if (sample_scores.empty()) {
    throw std::invalid_argument("is_loss: sample set must be non-empty");
  }
  if (sample_scores.size() != sample_proposal_logprobs.size()) {
    throw std::invalid_argument("is_loss: scores and log-probabilities must align");
  }
  require_finite(target_score, "is_loss");
  require_finite(target_proposal_logprob, "is_loss");
  require_finite(sample_scores, "is_loss");
  require_finite(sample_proposal_logprobs, "is_loss");

  std::vector<double> weighted(sample_scores.size());
  for (std::size_t i = 0; i < sample_scores.size(); ++i) {
    weighted[i] = sample_scores[i] - sample_proposal_logprobs[i];
  }
  return -(target_score - target_proposal_logprob) + log_sum_exp(weighted);
}

double sce_loss(double target_score, std::span<const double> negative_scores, double alpha) {
  if (negative_scores.empty()) {
    throw std::invalid_argument("sce_loss: negatives must be non-empty");
  }
  if (alpha < 1.0) {
    throw std::invalid_argument("sce_loss: alpha must be >= 1");
  }
  require_finite(target_score, "sce_loss");
  require_finite(negative_scores, "sce_loss");

  // Fold alpha into the negatives as log(alpha) so the whole normalizer goes
  // through one max-subtracted log-sum-exp.
  const double log_alpha = std::log(alpha);
  std::vector<double> terms;
  terms.reserve(negative_scores.size() + 1);
  terms.push_back(target_score);
  for (double s : negative_scores) {
    terms.push_back(s + log_alpha);
  }
  return -target_score + log_sum_exp(terms);
}

double loss_value(const LossSpec& spec, const LossInstance& instance) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::CE:
      return ce_loss(instance.target_index, instance.full_scores);
    case LossKind::CE_TopN:
      return ce_topn_loss(instance.target_index, instance.full_scores, spec.top_n);
    case LossKind::CE_Eta:
      return ce_eta_loss(instance.target_index, instance.full_scores, spec.eta);
    case LossKind::BCE:
      if (instance.negative_scores.size() != 1) {
        throw std::invalid_argument("BCE instance needs exactly one negative");
      }
      return bce_loss(instance.target_score, instance.negative_scores[0]);
    case LossKind::BPR:
      if (instance.negative_scores.size() != 1) {
        throw std::invalid_argument("BPR instance needs exactly one negative");
      }
      return bpr_loss(instance.target_score, instance.negative_scores[0]);
    case LossKind::NCE:
      return nce_loss(instance.target_score, instance.negative_scores, spec.c,
                      spec.catalog_size);
    case LossKind::NEG:
      return neg_loss(instance.target_score, instance.negative_scores);
    case LossKind::IS:
      return is_loss(instance.target_score, instance.target_proposal_logprob,
                     instance.negative_scores, instance.proposal_logprobs);
    case LossKind::SCE:
      return sce_loss(instance.target_score, instance.negative_scores, spec.alpha);
  }
  throw std::logic_error("loss_value: unreachable");
}

namespace {

// Softmax over the retained subset; entries outside it get zero gradient.
ScoreGradients ce_family_gradient(const LossInstance& instance,
                                  const std::vector<std::size_t>& retained) {
  const auto& scores = instance.full_scores;
  std::vector<double> retained_scores;
  retained_scores.reserve(retained.size());
  for (std::size_t v : retained) {
    retained_scores.push_back(scores[v]);
  }
  const double lse = log_sum_exp(retained_scores);

  ScoreGradients g;
  g.others.assign(scores.size(), 0.0);
  for (std::size_t v : retained) {
    g.others[v] += std::exp(scores[v] - lse);
  }
  g.others[instance.target_index] -= 1.0;
  g.target = g.others[instance.target_index];
  return g;
}

std::vector<std::size_t> retained_full(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

std::vector<std::size_t> retained_topn(const LossInstance& instance, int n) {
  const auto& scores = instance.full_scores;
  const double threshold = topn_threshold(scores, n);
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (scores[v] >= threshold || v == instance.target_index) {
      out.push_back(v);
    }
  }
  return out;
}

std::vector<std::size_t> retained_eta(const LossInstance& instance, double eta) {
  const auto& scores = instance.full_scores;
  const double target = scores[instance.target_index];
  const double threshold = target - eta * std::abs(target);
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (scores[v] >= threshold) {
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

ScoreGradients loss_score_gradient(const LossSpec& spec, const LossInstance& instance) {
  spec.validate();
  ScoreGradients g;
  switch (spec.kind) {
    case LossKind::CE: {
      ce_loss(instance.target_index, instance.full_scores);  // validates
      return ce_family_gradient(instance, retained_full(instance.full_scores.size()));
    }
    case LossKind::CE_TopN: {
      ce_topn_loss(instance.target_index, instance.full_scores, spec.top_n);
      return ce_family_gradient(instance, retained_topn(instance, spec.top_n));
    }
    case LossKind::CE_Eta: {
      ce_eta_loss(instance.target_index, instance.full_scores, spec.eta);
      return ce_family_gradient(instance, retained_eta(instance, spec.eta));
    }
    case LossKind::BCE: {
      if (instance.negative_scores.size() != 1) {
        throw std::invalid_argument("BCE instance needs exactly one negative");
      }
      g.target = sigmoid(instance.target_score) - 1.0;
      g.others = {sigmoid(instance.negative_scores[0])};
      return g;
    }
    case LossKind::BPR: {
      if (instance.negative_scores.size() != 1) {
        throw std::invalid_argument("BPR instance needs exactly one negative");
      }
      const double t = sigmoid(instance.negative_scores[0] - instance.target_score);
      g.target = -t;
      g.others = {t};
      return g;
    }
    case LossKind::NCE: {
      const int k = static_cast<int>(instance.negative_scores.size());
      if (k < 1) throw std::invalid_argument("NCE instance needs negatives");
      g.target =
          sigmoid(nce_corrected_score(instance.target_score, spec.c, k, spec.catalog_size)) -
          1.0;
      g.others.reserve(instance.negative_scores.size());
      for (double s : instance.negative_scores) {
        g.others.push_back(sigmoid(nce_corrected_score(s, spec.c, k, spec.catalog_size)));
      }
      return g;
    }
    case LossKind::NEG: {
      if (instance.negative_scores.empty()) {
        throw std::invalid_argument("NEG instance needs negatives");
      }
      g.target = sigmoid(instance.target_score) - 1.0;
      g.others.reserve(instance.negative_scores.size());
      for (double s : instance.negative_scores) {
        g.others.push_back(sigmoid(s));
      }
      return g;
    }
    case LossKind::IS: {
      // Treats the target score and the sample scores as independent inputs;
      // a sample that physically is the target contributes through its own
      // entry and the caller adds the two pieces.
      const auto& ss = instance.negative_scores;
      const auto& lq = instance.proposal_logprobs;
      if (ss.empty() || ss.size() != lq.size()) {
        throw std::invalid_argument("IS instance needs aligned samples and log-probs");
      }
      std::vector<double> weighted(ss.size());
      for (std::size_t i = 0; i < ss.size(); ++i) {
        weighted[i] = ss[i] - lq[i];
      }
      const double lse = log_sum_exp(weighted);
      g.target = -1.0;
      g.others.resize(ss.size());
      for (std::size_t i = 0; i < ss.size(); ++i) {
        g.others[i] = std::exp(weighted[i] - lse);
      }
      return g;
    }
    case LossKind::SCE: {
      const auto& ns = instance.negative_scores;
      if (ns.empty()) throw std::invalid_argument("SCE instance needs negatives");
      const double log_alpha = std::log(spec.alpha);
      std::vector<double> terms;
      terms.reserve(ns.size() + 1);
      terms.push_back(instance.target_score);
      for (double s : ns) {
        terms.push_back(s + log_alpha);
      }
      const double lse = log_sum_exp(terms);
      g.target = -1.0 + std::exp(instance.target_score - lse);
      g.others.resize(ns.size());
      for (std::size_t i = 0; i < ns.size(); ++i) {
        g.others[i] = std::exp(ns[i] + log_alpha - lse);
      }
      return g;
    }
  }
  throw std::logic_error("loss_score_gradient: unreachable");
}

}  // namespace rankloss
