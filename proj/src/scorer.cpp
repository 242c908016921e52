#include "rankloss/scorer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rankloss/dataset.hpp"
#include "rankloss/math_util.hpp"
#include "rankloss/rng.hpp"

namespace rankloss {

ScorerParams init_params(std::size_t catalog_size, std::size_t dim, std::uint64_t seed,
                         double decay) {
  if (dim < 1) {
    throw std::invalid_argument("init_params: dim must be >= 1");
  }
  if (catalog_size < 1) {
    throw std::invalid_argument("init_params: empty catalog");
  }
  if (decay <= 0.0 || decay > 1.0) {
    throw std::invalid_argument("init_params: decay must be in (0,1]");
  }
  ScorerParams params;
  params.item_count = catalog_size;
  params.dim = dim;
  params.decay = decay;
  params.embeddings.resize(catalog_size * dim);
  params.bias.assign(catalog_size, 0.0);
  params.transform.assign(dim * dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    params.transform[d * dim + d] = 1.0;
  }
  Rng rng = Rng::derive(seed, 0x5c02e5);
  for (double& w : params.embeddings) {
    w = rng.normal(0.0, 0.02);
  }
  return params;
}

HistoryState pool_history(std::span<const std::uint32_t> history, const ScorerParams& params,
                          std::size_t max_history) {
  if (max_history != kUnlimitedHistory && history.size() > max_history) {
    history = history.subspan(history.size() - max_history);
  }
  if (history.empty()) {
    throw std::invalid_argument("pool_history: empty history");
  }
  const std::size_t t = history.size();
  HistoryState state;
  state.items.assign(history.begin(), history.end());
  state.weights.resize(t);

  // w_i proportional to gamma^(t-i); normalize so the pooled vector is a
  // convex combination.
  double norm = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const double w = std::pow(params.decay, static_cast<double>(t - 1 - i));
    state.weights[i] = w;
    norm += w;
  }
  state.pooled.assign(params.dim, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    state.weights[i] /= norm;
    const std::uint32_t v = history[i];
    if (v >= params.item_count) {
      throw std::out_of_range("pool_history: item index out of range");
    }
    const auto row = params.row(v);
    for (std::size_t d = 0; d < params.dim; ++d) {
      state.pooled[d] += state.weights[i] * row[d];
    }
  }
  return state;
}

std::vector<double> query_vector(const HistoryState& state, const ScorerParams& params) {
  if (params.transform.size() != params.dim * params.dim) {
    throw std::invalid_argument("query_vector: transform shape mismatch");
  }
  std::vector<double> q(params.dim, 0.0);
  for (std::size_t r = 0; r < params.dim; ++r) {
    const double* w_row = params.transform.data() + r * params.dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < params.dim; ++d) {
      acc += w_row[d] * state.pooled[d];
    }
    q[r] = acc;
  }
  return q;
}

double score_item(const HistoryState& state, std::uint32_t v, const ScorerParams& params) {
  if (v >= params.item_count) {
    throw std::out_of_range("score_item: item index out of range");
  }
  const std::vector<double> q = query_vector(state, params);
  return dot(q, params.row(v)) + params.bias[v];
}

std::vector<double> score_all(const HistoryState& state, const ScorerParams& params) {
  const std::vector<double> q = query_vector(state, params);
  std::vector<double> scores(params.item_count);
  const double* emb = params.embeddings.data();
  for (std::size_t v = 0; v < params.item_count; ++v) {
    double acc = 0.0;
    const double* row = emb + v * params.dim;
    for (std::size_t d = 0; d < params.dim; ++d) {
      acc += q[d] * row[d];
    }
    scores[v] = acc + params.bias[v];
  }
  return scores;
}

GradAccum::GradAccum(std::size_t item_count, std::size_t dim)
    : item_count_(item_count),
      dim_(dim),
      rows_(item_count * dim, 0.0),
      bias_(item_count, 0.0),
      transform_(dim * dim, 0.0),
      is_touched_(item_count, 0) {}

void GradAccum::clear() {
  for (std::uint32_t v : touched_) {
    std::fill_n(rows_.data() + static_cast<std::size_t>(v) * dim_, dim_, 0.0);
    bias_[v] = 0.0;
    is_touched_[v] = 0;
  }
  touched_.clear();
  if (transform_touched_) {
    std::fill(transform_.begin(), transform_.end(), 0.0);
    transform_touched_ = false;
  }
}

void GradAccum::touch(std::uint32_t v) {
  if (!is_touched_[v]) {
    is_touched_[v] = 1;
    touched_.push_back(v);
  }
}

void GradAccum::add_row(std::uint32_t v, std::span<const double> values, double scale) {
  touch(v);
  double* row = rows_.data() + static_cast<std::size_t>(v) * dim_;
  for (std::size_t d = 0; d < dim_; ++d) {
    row[d] += scale * values[d];
  }
}

void GradAccum::add_bias(std::uint32_t v, double value) {
  touch(v);
  bias_[v] += value;
}

void GradAccum::add_transform_outer(std::span<const double> g, std::span<const double> h,
                                    double scale) {
  transform_touched_ = true;
  for (std::size_t r = 0; r < dim_; ++r) {
    double* out = transform_.data() + r * dim_;
    const double gr = scale * g[r];
    for (std::size_t c = 0; c < dim_; ++c) {
      out[c] += gr * h[c];
    }
  }
}

std::span<const double> GradAccum::row(std::uint32_t v) const {
  return std::span<const double>(rows_.data() + static_cast<std::size_t>(v) * dim_, dim_);
}

bool GradAccum::finite() const {
  for (std::uint32_t v : touched_) {
    if (!all_finite(row(v)) || !std::isfinite(bias_[v])) {
      return false;
    }
  }
  return !transform_touched_ || all_finite(transform_);
}

void accumulate_scorer_gradients(const HistoryState& state,
                                 std::span<const std::uint32_t> scored_items,
                                 std::span<const double> score_grads,
                                 const ScorerParams& params, double scale, GradAccum& acc) {
  if (scored_items.size() != score_grads.size()) {
    throw std::invalid_argument("scorer gradients: items and grads must align");
  }
  const std::vector<double> q = query_vector(state, params);
  // G = sum_v g_v e_v, shared by the transform and every history row.
  std::vector<double> emb_mix(params.dim, 0.0);
  for (std::size_t i = 0; i < scored_items.size(); ++i) {
    const std::uint32_t v = scored_items[i];
    if (v >= params.item_count) {
      throw std::out_of_range("scorer gradients: item index out of range");
    }
    const double g = score_grads[i];
    if (g == 0.0) {
      continue;
    }
    acc.add_row(v, q, scale * g);
    acc.add_bias(v, scale * g);
    const auto row = params.row(v);
    for (std::size_t d = 0; d < params.dim; ++d) {
      emb_mix[d] += g * row[d];
    }
  }
  acc.add_transform_outer(emb_mix, state.pooled, scale);
  // d/d h = W^T G.
  std::vector<double> pooled_grad(params.dim, 0.0);
  for (std::size_t r = 0; r < params.dim; ++r) {
    const double* w_row = params.transform.data() + r * params.dim;
    for (std::size_t c = 0; c < params.dim; ++c) {
      pooled_grad[c] += w_row[c] * emb_mix[r];
    }
  }
  for (std::size_t i = 0; i < state.items.size(); ++i) {
    acc.add_row(state.items[i], pooled_grad, scale * state.weights[i]);
  }
}

bool SparseGradient::finite() const {
  for (const auto& [v, row] : rows) {
    if (!all_finite(row)) {
      return false;
    }
  }
  for (const auto& [v, b] : bias) {
    if (!std::isfinite(b)) {
      return false;
    }
  }
  return all_finite(transform);
}

SparseGradient scorer_gradients(std::span<const std::uint32_t> history, std::uint32_t target,
                                std::span<const std::uint32_t> negatives,
                                std::span<const double> score_grads,
                                const ScorerParams& params, std::size_t max_history) {
  if (score_grads.size() != negatives.size() + 1) {
    throw std::invalid_argument("scorer_gradients: need one grad per scored item");
  }
  const HistoryState state = pool_history(history, params, max_history);
  std::vector<std::uint32_t> scored;
  scored.reserve(negatives.size() + 1);
  scored.push_back(target);
  scored.insert(scored.end(), negatives.begin(), negatives.end());

  GradAccum acc(params.item_count, params.dim);
  accumulate_scorer_gradients(state, scored, score_grads, params, 1.0, acc);

  SparseGradient out;
  for (std::uint32_t v : acc.touched()) {
    const auto row = acc.row(v);
    out.rows.emplace(v, std::vector<double>(row.begin(), row.end()));
    out.bias.emplace(v, acc.bias(v));
  }
  if (acc.transform_touched()) {
    out.transform.assign(acc.transform().begin(), acc.transform().end());
  }
  return out;
}

AdamState AdamState::for_params(const ScorerParams& params, double lr) {
  AdamState state;
  state.lr = lr;
  state.m_emb.assign(params.embeddings.size(), 0.0);
  state.v_emb.assign(params.embeddings.size(), 0.0);
  state.m_bias.assign(params.bias.size(), 0.0);
  state.v_bias.assign(params.bias.size(), 0.0);
  state.m_transform.assign(params.transform.size(), 0.0);
  state.v_transform.assign(params.transform.size(), 0.0);
  return state;
}

namespace {

void adam_validate(const ScorerParams& params, const AdamState& state) {
  if (state.lr <= 0.0 || state.beta1 < 0.0 || state.beta1 >= 1.0 || state.beta2 < 0.0 ||
      state.beta2 >= 1.0) {
    throw std::invalid_argument("adam_step: bad hyperparameters");
  }
  if (state.m_emb.size() != params.embeddings.size() ||
      state.m_bias.size() != params.bias.size()) {
    throw std::invalid_argument("adam_step: state shape mismatch");
  }
}

inline void adam_update(double g, double& theta, double& m, double& v, const AdamState& s,
                        double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g * g;
  const double m_hat = m / bc1;
  const double v_hat = v / bc2;
  theta -= s.lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
}

}  // namespace

void adam_step(ScorerParams& params, const SparseGradient& grads, AdamState& state) {
  adam_validate(params, state);
  if (!grads.finite()) {
    throw std::invalid_argument("adam_step: non-finite gradient");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (const auto& [v, row] : grads.rows) {
    const std::size_t base = static_cast<std::size_t>(v) * params.dim;
    for (std::size_t d = 0; d < params.dim; ++d) {
      adam_update(row[d], params.embeddings[base + d], state.m_emb[base + d],
                  state.v_emb[base + d], state, bc1, bc2);
    }
  }
  for (const auto& [v, g] : grads.bias) {
    adam_update(g, params.bias[v], state.m_bias[v], state.v_bias[v], state, bc1, bc2);
  }
  for (std::size_t i = 0; i < grads.transform.size(); ++i) {
    adam_update(grads.transform[i], params.transform[i], state.m_transform[i],
                state.v_transform[i], state, bc1, bc2);
  }
}

void adam_step(ScorerParams& params, const GradAccum& grads, AdamState& state) {
  adam_validate(params, state);
  if (!grads.finite()) {
    throw std::invalid_argument("adam_step: non-finite gradient");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::uint32_t v : grads.touched()) {
    const auto row = grads.row(v);
    const std::size_t base = static_cast<std::size_t>(v) * params.dim;
    for (std::size_t d = 0; d < params.dim; ++d) {
      adam_update(row[d], params.embeddings[base + d], state.m_emb[base + d],
                  state.v_emb[base + d], state, bc1, bc2);
    }
    adam_update(grads.bias(v), params.bias[v], state.m_bias[v], state.v_bias[v], state, bc1,
                bc2);
  }
  if (grads.transform_touched()) {
    const auto w = grads.transform();
    for (std::size_t i = 0; i < w.size(); ++i) {
      adam_update(w[i], params.transform[i], state.m_transform[i], state.v_transform[i],
                  state, bc1, bc2);
    }
  }
}

void save_params(const ScorerParams& params, const std::filesystem::path& path) {
  nlohmann::json j{{"item_count", params.item_count},
                   {"dim", params.dim},
                   {"decay", params.decay},
                   {"embeddings", params.embeddings},
                   {"bias", params.bias},
                   {"transform", params.transform}};
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << j.dump() << '\n';
}

ScorerParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  ScorerParams params;
  try {
    params.item_count = j.at("item_count").get<std::size_t>();
    params.dim = j.at("dim").get<std::size_t>();
    params.decay = j.at("decay").get<double>();
    params.embeddings = j.at("embeddings").get<std::vector<double>>();
    params.bias = j.at("bias").get<std::vector<double>>();
    params.transform = j.at("transform").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (params.embeddings.size() != params.item_count * params.dim ||
      params.bias.size() != params.item_count ||
      params.transform.size() != params.dim * params.dim) {
    throw DataError(path.string() + ": checkpoint shape mismatch");
  }
  return params;
}

}  // namespace rankloss
