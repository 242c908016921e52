#include "rankloss/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "rankloss/math_util.hpp"
#include "rankloss/rng.hpp"

namespace rankloss {

void TrainConfig::validate(const SequenceDataset& dataset) const {
  if (epochs < 1) {
    throw std::invalid_argument("train: epochs must be >= 1");
  }
  if (max_history < 1) {
    throw std::invalid_argument("train: max history must be >= 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("train: batch size must be >= 1");
  }
  if (eval_every < 1) {
    throw std::invalid_argument("train: eval_every must be >= 1");
  }
  if (lr <= 0.0) {
    throw std::invalid_argument("train: lr must be > 0");
  }
  if (dim < 1) {
    throw std::invalid_argument("train: dim must be >= 1");
  }
  LossSpec resolved = loss;
  resolved.catalog_size = dataset.item_count();
  resolved.validate();
  if (!loss_uses_full_scores(loss.kind)) {
    SamplerConfig s = sampler;
    s.negatives = resolved.negatives;
    s.validate(dataset.item_count());
    // Sampling more than 5% of the catalog defeats the point of the
    // approximation; allowed but worth flagging.
  }
  if (std::find(cutoffs.begin(), cutoffs.end(), 10) == cutoffs.end()) {
    throw std::invalid_argument("train: cutoffs must include 10 (checkpoint metric)");
  }
}

namespace {

struct Example {
  std::uint32_t user = 0;
  std::uint32_t prefix_len = 0;  // history = train_prefix[0, prefix_len)
};

// Window off mirrors training each sequence once with the most recent L
// interactions: only targets inside the last window are visited. Window on
// visits every prefix (sliding window, stride 1).
std::vector<Example> build_examples(const SequenceDataset& dataset, std::size_t max_history,
                                    bool sliding_window) {
  std::vector<Example> examples;
  for (std::size_t u = 0; u < dataset.user_count(); ++u) {
    const std::size_t train_len = dataset.train_prefix(u).size();
    if (train_len < 2) {
      continue;  // nothing to predict inside the training region
    }
    const std::size_t first_target =
        sliding_window || train_len <= max_history ? 1 : train_len - max_history;
    for (std::size_t t = first_target; t < train_len; ++t) {
      examples.push_back(
          {static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(t)});
    }
  }
  if (examples.empty()) {
    throw std::invalid_argument("train: dataset yields no training examples");
  }
  return examples;
}

}  // namespace

RunRecord train(const TrainConfig& config, const SequenceDataset& dataset) {
  config.validate(dataset);
  const std::size_t catalog = dataset.item_count();

  LossSpec spec = config.loss;
  spec.catalog_size = catalog;
  const bool full_scores = loss_uses_full_scores(spec.kind);

  SamplerConfig sampler = config.sampler;
  sampler.negatives = spec.negatives;

  ScorerParams params = init_params(catalog, config.dim, config.seed, config.decay);
  AdamState adam = AdamState::for_params(params, config.lr);
  GradAccum acc(catalog, config.dim);

  std::vector<Example> examples =
      build_examples(dataset, config.max_history, config.sliding_window);

  RunRecord record;
  ScorerParams best_params = params;
  record.best_val_ndcg10 = -1.0;

  std::vector<std::uint32_t> negatives;
  std::vector<double> scored_grads;
  std::vector<std::uint32_t> scored_items;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(epoch));

    // Fisher-Yates over the example order.
    for (std::size_t i = examples.size() - 1; i > 0; --i) {
      std::swap(examples[i], examples[rng.uniform_index(i + 1)]);
    }

    double loss_sum = 0.0;
    std::size_t cursor = 0;
    while (cursor < examples.size()) {
      const std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(config.batch_size), examples.size());
      const double scale = 1.0 / static_cast<double>(batch_end - cursor);
      acc.clear();
      for (std::size_t i = cursor; i < batch_end; ++i) {
        const Example& ex = examples[i];
        const auto prefix = dataset.train_prefix(ex.user);
        const auto history = prefix.first(ex.prefix_len);
        const std::uint32_t target = prefix[ex.prefix_len];
        const HistoryState state = pool_history(history, params, config.max_history);

        LossInstance instance;
        instance.target_index = target;
        double loss = 0.0;
        if (full_scores) {
          instance.full_scores = score_all(state, params);
          instance.target_score = instance.full_scores[target];
          if (!all_finite(instance.full_scores)) {
            throw TrainDivergence("non-finite scores at epoch " + std::to_string(epoch) +
                                  ", user " + std::to_string(dataset.user_ids[ex.user]));
          }
          loss = loss_value(spec, instance);
          const ScoreGradients grads = loss_score_gradient(spec, instance);
          scored_items.clear();
          scored_grads.clear();
          for (std::uint32_t v = 0; v < catalog; ++v) {
            if (grads.others[v] != 0.0) {
              scored_items.push_back(v);
              scored_grads.push_back(grads.others[v]);
            }
          }
          accumulate_scorer_gradients(state, scored_items, scored_grads, params, scale, acc);
        } else {
          negatives = sample_uniform_negatives(sampler, catalog, target, rng);
          instance.target_score = score_item(state, target, params);
          instance.negative_scores.resize(negatives.size());
          for (std::size_t n = 0; n < negatives.size(); ++n) {
            instance.negative_scores[n] = score_item(state, negatives[n], params);
          }
          if (!std::isfinite(instance.target_score) ||
              !all_finite(instance.negative_scores)) {
            throw TrainDivergence("non-finite scores at epoch " + std::to_string(epoch) +
                                  ", user " + std::to_string(dataset.user_ids[ex.user]));
          }
          if (spec.kind == LossKind::IS) {
            // Uniform proposal; the correction terms cancel in the loss but
            // are carried for fidelity to the definition.
            instance.target_proposal_logprob = -std::log(static_cast<double>(catalog));
            instance.proposal_logprobs.assign(negatives.size(),
                                              instance.target_proposal_logprob);
          }
          loss = loss_value(spec, instance);
          const ScoreGradients grads = loss_score_gradient(spec, instance);
          scored_items.clear();
          scored_grads.clear();
          scored_items.push_back(target);
          scored_grads.push_back(grads.target);
          for (std::size_t n = 0; n < negatives.size(); ++n) {
            scored_items.push_back(negatives[n]);
            scored_grads.push_back(grads.others[n]);
          }
          accumulate_scorer_gradients(state, scored_items, scored_grads, params, scale, acc);
        }
        if (!std::isfinite(loss)) {
          throw TrainDivergence("non-finite loss at epoch " + std::to_string(epoch) +
                                ", user " + std::to_string(dataset.user_ids[ex.user]));
        }
        loss_sum += loss;
      }
      adam_step(params, acc, adam);
      cursor = batch_end;
    }

    EpochRecord entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(examples.size());
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      entry.validation = evaluate_scorer(params, dataset, EvalSplit::Validation,
                                         config.cutoffs, config.max_history);
      const double ndcg10 = entry.validation->cutoff(10).ndcg;
      if (ndcg10 > record.best_val_ndcg10) {
        record.best_val_ndcg10 = ndcg10;
        record.best_epoch = epoch;
        best_params = params;
      }
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    record.epochs.push_back(std::move(entry));
  }

  record.test = evaluate_scorer(best_params, dataset, EvalSplit::Test, config.cutoffs,
                                config.max_history);
  record.best_params = std::move(best_params);
  return record;
}

namespace {

std::vector<const EpochRecord*> evaluated_epochs(const RunRecord& record) {
  std::vector<const EpochRecord*> out;
  for (const auto& e : record.epochs) {
    if (e.validation) {
      out.push_back(&e);
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("run record has no evaluated epochs");
  }
  return out;
}

}  // namespace

int convergence_epoch(const RunRecord& record, double fraction) {
  const auto evaluated = evaluated_epochs(record);
  double peak = 0.0;
  for (const auto* e : evaluated) {
    peak = std::max(peak, e->validation->cutoff(10).ndcg);
  }
  const double threshold = fraction * peak;
  for (const auto* e : evaluated) {
    if (e->validation->cutoff(10).ndcg >= threshold) {
      return e->epoch;
    }
  }
  throw std::logic_error("convergence_epoch: maximum not reached");  // unreachable
}

bool run_converged(const RunRecord& record, double fraction) {
  const auto evaluated = evaluated_epochs(record);
  return convergence_epoch(record, fraction) < evaluated.back()->epoch;
}

void write_run_csv(const RunRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "epoch,train_loss,ndcg@10,hr@10,mrr@10\n";
  out.precision(10);
  for (const auto& e : record.epochs) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (e.validation) {
      const auto& at10 = e.validation->cutoff(10);
      out << at10.ndcg << ',' << at10.hr << ',' << at10.mrr;
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

std::vector<EtaSweepRow> run_eta_sweep(const TrainConfig& base, std::span<const double> etas,
                                       const SequenceDataset& dataset) {
  std::vector<EtaSweepRow> rows;
  for (double eta : etas) {
    TrainConfig config = base;
    config.loss.kind = LossKind::CE_Eta;
    config.loss.eta = eta;
    const RunRecord record = train(config, dataset);
    rows.push_back({eta, convergence_epoch(record), record.best_val_ndcg10,
                    record.test.cutoff(10).ndcg});
  }
  TrainConfig reference = base;
  reference.loss.kind = LossKind::CE;
  const RunRecord record = train(reference, dataset);
  rows.push_back({std::nullopt, convergence_epoch(record), record.best_val_ndcg10,
                  record.test.cutoff(10).ndcg});
  return rows;
}

std::vector<CSweepRow> run_c_sweep(const TrainConfig& base, std::span<const double> cs,
                                   const SequenceDataset& dataset) {
  std::vector<CSweepRow> rows;
  for (double c : cs) {
    TrainConfig config = base;
    config.loss.kind = LossKind::NCE;
    config.loss.c = c;
    const RunRecord record = train(config, dataset);
    rows.push_back({c, convergence_epoch(record), run_converged(record),
                    record.best_val_ndcg10, record.test.cutoff(10).ndcg});
  }
  return rows;
}

std::vector<AlphaKCell> run_alpha_k_grid(const TrainConfig& base,
                                         std::span<const double> alphas,
                                         std::span<const int> ks,
                                         const SequenceDataset& dataset) {
  std::vector<AlphaKCell> cells;
  for (double alpha : alphas) {
    for (int k : ks) {
      TrainConfig config = base;
      config.loss.kind = LossKind::SCE;
      config.loss.alpha = alpha;
      config.loss.negatives = k;
      const RunRecord record = train(config, dataset);
      cells.push_back({alpha, k, convergence_epoch(record), record.best_val_ndcg10,
                       record.test.cutoff(10).ndcg});
    }
  }
  TrainConfig reference = base;
  reference.loss.kind = LossKind::CE;
  const RunRecord record = train(reference, dataset);
  cells.push_back({std::nullopt, 0, convergence_epoch(record), record.best_val_ndcg10,
                   record.test.cutoff(10).ndcg});
  return cells;
}

}  // namespace rankloss
