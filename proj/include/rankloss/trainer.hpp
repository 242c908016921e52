#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rankloss/dataset.hpp"
#include "rankloss/losses.hpp"
#include "rankloss/metrics.hpp"
#include "rankloss/sampling.hpp"
#include "rankloss/scorer.hpp"

namespace rankloss {

// Training aborted on a non-finite loss.
struct TrainDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  LossSpec loss;
  SamplerConfig sampler;  // negatives per positive; training default is
                          // replacement on, target excluded
  int epochs = 200;
  double lr = 1e-3;
  int batch_size = 128;
  std::size_t max_history = 50;  // L
  bool sliding_window = false;   // on: every prefix trains (stride 1)
  int eval_every = 1;
  std::uint64_t seed = 0;
  std::vector<int> cutoffs = {1, 5, 10};
  std::size_t dim = 32;
  double decay = 0.8;  // gamma

  void validate(const SequenceDataset& dataset) const;
};

struct EpochRecord {
  int epoch = 0;       // 1-based, contiguous
  double train_loss = 0.0;  // mean per-example loss
  std::optional<MetricReport> validation;
  double seconds = 0.0;  // wall time, excluded from determinism comparisons
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  MetricReport test;  // at the best-validation checkpoint
  int best_epoch = 0;
  double best_val_ndcg10 = 0.0;
  ScorerParams best_params;  // the checkpoint the test report came from
};

RunRecord train(const TrainConfig& config, const SequenceDataset& dataset);

// First evaluated epoch whose validation NDCG@10 reaches fraction * (run
// maximum).
int convergence_epoch(const RunRecord& record, double fraction = 0.99);

// A run that first crosses the threshold only at its final evaluation never
// plateaued within budget.
bool run_converged(const RunRecord& record, double fraction = 0.99);

// CSV: epoch,train_loss,ndcg@10,hr@10,mrr@10 (metrics blank on epochs
// without validation).
void write_run_csv(const RunRecord& record, const std::filesystem::path& path);

struct EtaSweepRow {
  std::optional<double> eta;  // nullopt = CE reference row
  int convergence_epoch = 0;
  double best_ndcg10 = 0.0;
  double test_ndcg10 = 0.0;
};
// One CE_Eta run per eta, plus a plain CE reference row appended last.
std::vector<EtaSweepRow> run_eta_sweep(const TrainConfig& base, std::span<const double> etas,
                                       const SequenceDataset& dataset);

struct CSweepRow {
  double c = 0.0;
  int convergence_epoch = 0;
  bool converged = false;
  double best_ndcg10 = 0.0;
  double test_ndcg10 = 0.0;
};
std::vector<CSweepRow> run_c_sweep(const TrainConfig& base, std::span<const double> cs,
                                   const SequenceDataset& dataset);

struct AlphaKCell {
  std::optional<double> alpha;  // nullopt = CE reference row
  int negatives = 0;
  int convergence_epoch = 0;
  double best_ndcg10 = 0.0;
  double test_ndcg10 = 0.0;
};
std::vector<AlphaKCell> run_alpha_k_grid(const TrainConfig& base,
                                         std::span<const double> alphas,
                                         std::span<const int> ks,
                                         const SequenceDataset& dataset);

}  // namespace rankloss
