#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rankloss {

// Every member of the loss family shares the shape -s_{v+} + log Z; they
// differ only in how the normalizing term Z is assembled.
enum class LossKind { CE, CE_TopN, CE_Eta, BCE, BPR, NCE, NEG, IS, SCE };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// CE, CE_TopN and CE_Eta consume the full score vector; the rest see only
// the target score and sampled negatives.
bool loss_uses_full_scores(LossKind kind);

struct LossSpec {
  LossKind kind = LossKind::CE;
  int top_n = 1;                  // CE_TopN
  double eta = 0.0;               // CE_Eta
  double c = 0.0;                 // NCE normalizer estimate (log Z guess)
  double alpha = 1.0;             // SCE scale, >= 1
  int negatives = 1;              // K for sampled kinds
  std::size_t catalog_size = 0;   // |I|

  void validate() const;  // throws std::invalid_argument

  // Wire encoding, e.g. {"kind":"SCE","alpha":100,"K":500}.
  nlohmann::json to_json() const;
  static LossSpec from_json(const nlohmann::json& j);
};

// Scores exactly as one loss evaluation sees them.
struct LossInstance {
  double target_score = 0.0;
  std::uint32_t target_index = 0;          // position in full_scores (CE kinds)
  std::vector<double> full_scores;         // CE kinds only
  std::vector<double> negative_scores;     // sampled kinds; IS: the sample set
  std::vector<double> proposal_logprobs;   // IS, parallel to negative_scores
  double target_proposal_logprob = 0.0;    // IS
};

// --- loss values (nats) ---

double ce_loss(std::uint32_t target_index, std::span<const double> scores);

// Retains items scoring >= the n-th largest score (tie groups kept whole),
// target always included.
double ce_topn_loss(std::uint32_t target_index, std::span<const double> scores, int n);

// Retains items with s_v - s_+ >= -eta*|s_+|.
double ce_eta_loss(std::uint32_t target_index, std::span<const double> scores, double eta);

double bce_loss(double target_score, double negative_score);
double bpr_loss(double target_score, double negative_score);

// s' = s - c - log(K/|I|), the uniform-noise correction.
double nce_corrected_score(double score, double c, int k, std::size_t catalog_size);
double nce_loss(double target_score, std::span<const double> negative_scores, double c,
                std::size_t catalog_size);
double neg_loss(double target_score, std::span<const double> negative_scores);

// Normalizer runs over the provided sample set only; the target enters it
// only if the caller put it there.
double is_loss(double target_score, double target_proposal_logprob,
               std::span<const double> sample_scores,
               std::span<const double> sample_proposal_logprobs);

// Z_hat(alpha) = exp(s_+) + alpha * sum_i exp(s_i).
double sce_loss(double target_score, std::span<const double> negative_scores, double alpha);

double loss_value(const LossSpec& spec, const LossInstance& instance);

// --- gradients with respect to scores ---

struct ScoreGradients {
  double target = 0.0;          // d loss / d s_{v+}
  // Sampled kinds: one entry per negative (per sample for IS).
  // CE kinds: one entry per catalog item; the target's position already
  // includes the -1 term and equals `target`.
  std::vector<double> others;
};

ScoreGradients loss_score_gradient(const LossSpec& spec, const LossInstance& instance);

}  // namespace rankloss
