#include "rankloss/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rankloss/bounds.hpp"
#include "rankloss/dataset.hpp"
#include "rankloss/trainer.hpp"
#include "rankloss/verification.hpp"

namespace rankloss::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitViolated = 3;

std::uint64_t env_seed() {
  if (const char* env = std::getenv("RANKLOSS_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path);
  }
  out << text;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) {
    throw std::invalid_argument("expected comma-separated integers: " + text);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stod(tok));
  }
  if (out.empty()) {
    throw std::invalid_argument("expected comma-separated numbers: " + text);
  }
  return out;
}

// Train options shared by `train` and `sweep`.
struct TrainCliOptions {
  std::string data_path;
  std::string config_path;
  std::string loss_name = "CE";
  int top_n = 1;
  double eta = 0.0;
  double c = 10.0;
  double alpha = 100.0;
  int negatives = 1;
  bool include_target = false;
  bool no_replacement = false;
  int epochs = 200;
  double lr = 1e-3;
  int batch_size = 128;
  std::size_t max_history = 50;
  bool sliding_window = false;
  int eval_every = 1;
  std::uint64_t seed = 0;
  std::size_t dim = 32;
  double decay = 0.8;
  std::string cutoffs = "1,5,10";
};

void add_train_options(CLI::App* cmd, TrainCliOptions& opt) {
  cmd->add_option("--data", opt.data_path, "dataset JSON path")->required();
  cmd->add_option("--config", opt.config_path, "JSON config file (explicit flags win)");
  cmd->add_option("--loss", opt.loss_name,
                  "CE, CE_TopN, CE_Eta, BCE, BPR, NCE, NEG, IS or SCE");
  cmd->add_option("--n", opt.top_n, "CE_TopN retention size");
  cmd->add_option("--eta", opt.eta, "CE_Eta truncation width");
  cmd->add_option("--c", opt.c, "NCE normalizer estimate");
  cmd->add_option("--alpha", opt.alpha, "SCE scale");
  cmd->add_option("--K", opt.negatives, "negatives per positive");
  cmd->add_flag("--include-target", opt.include_target, "negatives may hit the target");
  cmd->add_flag("--no-replacement", opt.no_replacement,
                "sample negatives without replacement");
  cmd->add_option("--epochs", opt.epochs);
  cmd->add_option("--lr", opt.lr);
  cmd->add_option("--batch-size", opt.batch_size);
  cmd->add_option("--max-history", opt.max_history, "history window L");
  cmd->add_flag("--sliding-window", opt.sliding_window, "train every prefix (stride 1)");
  cmd->add_option("--eval-every", opt.eval_every);
  cmd->add_option("--seed", opt.seed, "falls back to RANKLOSS_SEED, then 0");
  cmd->add_option("--dim", opt.dim, "embedding size");
  cmd->add_option("--gamma", opt.decay, "history pooling decay");
  cmd->add_option("--cutoffs", opt.cutoffs, "comma-separated ranking cutoffs");
}

// Precedence: built-in defaults < env seed < JSON config file < explicit
// flags.
TrainConfig build_train_config(const CLI::App* cmd, const TrainCliOptions& opt) {
  TrainConfig config;
  config.seed = env_seed();
  if (!opt.config_path.empty()) {
    const nlohmann::json j = load_json_file(opt.config_path);
    if (j.contains("loss")) config.loss = LossSpec::from_json(j.at("loss"));
    if (j.contains("epochs")) config.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) config.lr = j.at("lr").get<double>();
    if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<int>();
    if (j.contains("max_history"))
      config.max_history = j.at("max_history").get<std::size_t>();
    if (j.contains("sliding_window"))
      config.sliding_window = j.at("sliding_window").get<bool>();
    if (j.contains("eval_every")) config.eval_every = j.at("eval_every").get<int>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dim")) config.dim = j.at("dim").get<std::size_t>();
    if (j.contains("gamma")) config.decay = j.at("gamma").get<double>();
    if (j.contains("cutoffs")) config.cutoffs = j.at("cutoffs").get<std::vector<int>>();
    if (j.contains("include_target"))
      config.sampler.include_target = j.at("include_target").get<bool>();
    if (j.contains("replacement"))
      config.sampler.replacement = j.at("replacement").get<bool>();
  }
  const auto passed = [cmd](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--loss")) config.loss.kind = loss_kind_from_name(opt.loss_name);
  if (passed("--n")) config.loss.top_n = opt.top_n;
  if (passed("--eta")) config.loss.eta = opt.eta;
  if (passed("--c")) config.loss.c = opt.c;
  if (passed("--alpha")) config.loss.alpha = opt.alpha;
  if (passed("--K")) config.loss.negatives = opt.negatives;
  if (passed("--include-target")) config.sampler.include_target = opt.include_target;
  if (passed("--no-replacement")) config.sampler.replacement = !opt.no_replacement;
  if (passed("--epochs")) config.epochs = opt.epochs;
  if (passed("--lr")) config.lr = opt.lr;
  if (passed("--batch-size")) config.batch_size = opt.batch_size;
  if (passed("--max-history")) config.max_history = opt.max_history;
  if (passed("--sliding-window")) config.sliding_window = opt.sliding_window;
  if (passed("--eval-every")) config.eval_every = opt.eval_every;
  if (passed("--seed")) config.seed = opt.seed;
  if (passed("--dim")) config.dim = opt.dim;
  if (passed("--gamma")) config.decay = opt.decay;
  if (passed("--cutoffs")) config.cutoffs = parse_int_list(opt.cutoffs);
  config.sampler.negatives = config.loss.negatives;
  return config;
}

std::string sweep_csv(const std::string& kind, const TrainConfig& config,
                      const SequenceDataset& dataset, const std::string& etas,
                      const std::string& cs, const std::string& alphas,
                      const std::string& ks) {
  std::ostringstream out;
  out.precision(10);
  if (kind == "eta") {
    out << "eta,convergence_epoch,best_ndcg@10,test_ndcg@10\n";
    for (const auto& row : run_eta_sweep(config, parse_double_list(etas), dataset)) {
      if (row.eta) {
        out << *row.eta;
      } else {
        out << "CE";
      }
      out << ',' << row.convergence_epoch << ',' << row.best_ndcg10 << ','
          << row.test_ndcg10 << '\n';
    }
  } else if (kind == "c") {
    out << "c,convergence_epoch,converged,best_ndcg@10,test_ndcg@10\n";
    for (const auto& row : run_c_sweep(config, parse_double_list(cs), dataset)) {
      out << row.c << ',' << row.convergence_epoch << ',' << (row.converged ? 1 : 0) << ','
          << row.best_ndcg10 << ',' << row.test_ndcg10 << '\n';
    }
  } else {
    out << "alpha,K,convergence_epoch,best_ndcg@10,test_ndcg@10\n";
    for (const auto& cell :
         run_alpha_k_grid(config, parse_double_list(alphas), parse_int_list(ks), dataset)) {
      if (cell.alpha) {
        out << *cell.alpha;
      } else {
        out << "CE";
      }
      out << ',' << cell.negatives << ',' << cell.convergence_epoch << ','
          << cell.best_ndcg10 << ',' << cell.test_ndcg10 << '\n';
    }
  }
  return out.str();
}

}  // namespace

int run_command(std::vector<std::string> args) {
  CLI::App app{"ranking-loss laboratory"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic Markov dataset");
  int users = 2000, items = 500, len_min = 8, len_max = 24;
  double self_consistency = 0.8;
  std::uint64_t gen_seed = env_seed();
  std::string gen_out;
  gen->add_option("--users", users)->check(CLI::PositiveNumber);
  gen->add_option("--items", items)->check(CLI::PositiveNumber);
  gen->add_option("--min-len", len_min);
  gen->add_option("--max-len", len_max);
  gen->add_option("--self-consistency", self_consistency)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the scorer with a chosen loss");
  TrainCliOptions train_opt;
  add_train_options(train_cmd, train_opt);
  std::string train_out, train_save_params;
  train_cmd->add_option("--out", train_out, "per-epoch CSV path");
  train_cmd->add_option("--save-params", train_save_params,
                        "best-validation checkpoint JSON path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string eval_data, eval_params, eval_split = "test", eval_out,
              eval_cutoffs = "1,5,10", eval_format = "json";
  std::size_t eval_max_history = 50;
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--params", eval_params)->required();
  eval_cmd->add_option("--split", eval_split)->check(CLI::IsMember({"validation", "test"}));
  eval_cmd->add_option("--cutoffs", eval_cutoffs);
  eval_cmd->add_option("--max-history", eval_max_history);
  eval_cmd->add_option("--out", eval_out);
  eval_cmd->add_option("--format", eval_format)->check(CLI::IsMember({"json", "csv"}));

  // verify-bounds
  auto* verify_cmd =
      app.add_subcommand("verify-bounds", "run the theory verification suites");
  std::string suite = "all", verify_out, verify_format = "json";
  long trials = 100000;
  std::uint64_t verify_seed = env_seed();
  bool mutate_sce = false;
  verify_cmd->add_option("--suite", suite)
      ->check(CLI::IsMember({"identities", "props", "lemmas", "binomial", "theorems", "all"}));
  verify_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", verify_seed);
  verify_cmd->add_option("--out", verify_out);
  verify_cmd->add_option("--format", verify_format)->check(CLI::IsMember({"json"}));
  verify_cmd->add_flag("--self-test-mutation", mutate_sce,
                       "deliberately mis-evaluate SCE to prove violations are caught");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "eta / c / alpha-K sweeps");
  TrainCliOptions sweep_opt;
  add_train_options(sweep_cmd, sweep_opt);
  std::string sweep_kind = "eta", sweep_out, etas = "0.1,0.7,5.0", cs = "1,5,10,50,100",
              alphas = "1,10,100", ks = "4,16,64";
  sweep_cmd->add_option("--kind", sweep_kind)->check(CLI::IsMember({"eta", "c", "alpha-k"}));
  sweep_cmd->add_option("--etas", etas);
  sweep_cmd->add_option("--cs", cs);
  sweep_cmd->add_option("--alphas", alphas);
  sweep_cmd->add_option("--Ks", ks);
  sweep_cmd->add_option("--out", sweep_out)->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const SequenceDataset dataset = generate_markov_dataset(
          users, items, {len_min, len_max}, self_consistency, gen_seed);
      save_dataset(dataset, gen_out);
      std::cout << "wrote " << gen_out << ": " << dataset.user_count() << " users, "
                << dataset.item_count() << " items\n";
      return kExitOk;
    }
    if (train_cmd->parsed()) {
      const SequenceDataset dataset = load_dataset(train_opt.data_path);
      const TrainConfig config = build_train_config(train_cmd, train_opt);
      const RunRecord record = train(config, dataset);
      if (!train_out.empty()) {
        write_run_csv(record, train_out);
      }
      if (!train_save_params.empty()) {
        save_params(record.best_params, train_save_params);
      }
      std::cout << "best validation ndcg@10 " << record.best_val_ndcg10 << " at epoch "
                << record.best_epoch << "; test ndcg@10 " << record.test.cutoff(10).ndcg
                << "\n";
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      const SequenceDataset dataset = load_dataset(eval_data);
      const ScorerParams params = load_params(eval_params);
      const MetricReport report = evaluate_scorer(
          params, dataset,
          eval_split == "validation" ? EvalSplit::Validation : EvalSplit::Test,
          parse_int_list(eval_cutoffs), eval_max_history);
      if (eval_format == "csv") {
        std::ostringstream csv;
        csv.precision(10);
        csv << "k,ndcg,hr,mrr,users\n";
        for (const auto& row : report.at) {
          csv << row.k << ',' << row.ndcg << ',' << row.hr << ',' << row.mrr << ','
              << report.user_count << '\n';
        }
        write_text(eval_out, csv.str());
      } else {
        write_text(eval_out, report.to_json().dump() + "\n");
      }
      return kExitOk;
    }
    if (verify_cmd->parsed()) {
      const verify::SuiteResult result =
          verify::run_suite(suite, trials, verify_seed, mutate_sce);
      std::string text;
      for (const auto& record : result.records) {
        text += record.dump();
        text += '\n';
      }
      write_text(verify_out, text);
      if (!result.ok()) {
        std::cerr << result.violations << " violation(s) found\n";
        return kExitViolated;
      }
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      const SequenceDataset dataset = load_dataset(sweep_opt.data_path);
      const TrainConfig config = build_train_config(sweep_cmd, sweep_opt);
      write_text(sweep_out, sweep_csv(sweep_kind, config, dataset, etas, cs, alphas, ks));
      return kExitOk;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace rankloss::cli
