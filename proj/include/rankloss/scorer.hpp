#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

namespace rankloss {

// Item embeddings, a per-item bias, and a learned query transform. Queries
// are pooled histories h; scores are s(q,v) = (W h(q)) . e_v + b_v. W starts
// as the identity, so the initial scorer is a plain inner product; it exists
// because a shared embedding table alone cannot score an item's successor
// above the item itself (the history's self-similarity always wins on
// average), which is exactly what next-item prediction needs.
struct ScorerParams {
  std::size_t item_count = 0;
  std::size_t dim = 0;
  double decay = 0.8;  // pooling decay gamma in (0,1]
  std::vector<double> embeddings;  // item_count x dim, row-major
  std::vector<double> bias;        // item_count
  std::vector<double> transform;   // dim x dim, row-major; W

  std::span<double> row(std::uint32_t v) {
    return std::span<double>(embeddings.data() + static_cast<std::size_t>(v) * dim, dim);
  }
  std::span<const double> row(std::uint32_t v) const {
    return std::span<const double>(embeddings.data() + static_cast<std::size_t>(v) * dim, dim);
  }
};

// Embeddings i.i.d. N(0, 0.02^2), bias zero, transform identity;
// deterministic in the seed.
ScorerParams init_params(std::size_t catalog_size, std::size_t dim, std::uint64_t seed,
                         double decay = 0.8);

inline constexpr std::size_t kUnlimitedHistory = 0;

// Decayed history pooling: h = sum_i w_i e_{v_i} with
// w_i = gamma^(t-i) / sum_j gamma^(t-j) over the kept (most recent) items.
struct HistoryState {
  std::vector<std::uint32_t> items;  // kept history, oldest first
  std::vector<double> weights;       // parallel to items, sums to 1
  std::vector<double> pooled;        // h(q), length dim
};

HistoryState pool_history(std::span<const std::uint32_t> history, const ScorerParams& params,
                          std::size_t max_history = kUnlimitedHistory);

// q = W h, the transformed query the scores are taken against.
std::vector<double> query_vector(const HistoryState& state, const ScorerParams& params);

double score_item(const HistoryState& state, std::uint32_t v, const ScorerParams& params);
std::vector<double> score_all(const HistoryState& state, const ScorerParams& params);

// Dense-backed gradient accumulator that tracks which rows were touched, so
// optimizer updates stay sparse while accumulation stays O(1) per entry.
class GradAccum {
 public:
  GradAccum(std::size_t item_count, std::size_t dim);

  void clear();
  void add_row(std::uint32_t v, std::span<const double> values, double scale);
  void add_bias(std::uint32_t v, double value);
  // dW += scale * g (x) h.
  void add_transform_outer(std::span<const double> g, std::span<const double> h,
                           double scale);

  std::span<const std::uint32_t> touched() const { return touched_; }
  std::span<const double> row(std::uint32_t v) const;
  double bias(std::uint32_t v) const { return bias_[v]; }
  std::span<const double> transform() const { return transform_; }
  bool transform_touched() const { return transform_touched_; }
  std::size_t dim() const { return dim_; }
  bool finite() const;

 private:
  void touch(std::uint32_t v);

  std::size_t item_count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
  std::vector<double> bias_;
  std::vector<double> transform_;
  bool transform_touched_ = false;
  std::vector<std::uint32_t> touched_;
  std::vector<std::uint8_t> is_touched_;
};

// Chain rule through q = W h and the pooled history: for each scored item v
// with d loss/d s_v = g_v, writing G = sum_v g_v e_v,
//   d/d e_v    += g_v * q,      d/d b_v += g_v,
//   d/d W      += G (x) h,
//   d/d e_{v_i} += w_i * (W^T G)   for every kept history item v_i.
// Contributions accumulate additively when an item plays several roles.
void accumulate_scorer_gradients(const HistoryState& state,
                                 std::span<const std::uint32_t> scored_items,
                                 std::span<const double> score_grads,
                                 const ScorerParams& params, double scale, GradAccum& acc);

// Map-backed gradient: touched rows only.
struct SparseGradient {
  std::unordered_map<std::uint32_t, std::vector<double>> rows;
  std::unordered_map<std::uint32_t, double> bias;
  std::vector<double> transform;  // dim x dim; empty means zero
  bool finite() const;
};

// score_grads holds d loss/d s for the target first, then each negative.
SparseGradient scorer_gradients(std::span<const std::uint32_t> history, std::uint32_t target,
                                std::span<const std::uint32_t> negatives,
                                std::span<const double> score_grads,
                                const ScorerParams& params,
                                std::size_t max_history = kUnlimitedHistory);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<double> m_emb, v_emb;  // item_count x dim
  std::vector<double> m_bias, v_bias;
  std::vector<double> m_transform, v_transform;  // dim x dim

  static AdamState for_params(const ScorerParams& params, double lr);
};

// Bias-corrected Adam applied lazily to the touched rows only.
void adam_step(ScorerParams& params, const SparseGradient& grads, AdamState& state);
void adam_step(ScorerParams& params, const GradAccum& grads, AdamState& state);

// Checkpoint: JSON with a shape header followed by row-major values.
void save_params(const ScorerParams& params, const std::filesystem::path& path);
ScorerParams load_params(const std::filesystem::path& path);

}  // namespace rankloss
