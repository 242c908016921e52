#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace rankloss {

// Malformed or degenerate input data; the CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interaction {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

// Bijection between raw item ids and dense indices [0, |I|).
struct Catalog {
  std::vector<std::int64_t> index_to_raw;
  std::unordered_map<std::int64_t, std::uint32_t> raw_to_index;

  std::size_t item_count() const { return index_to_raw.size(); }
  std::uint32_t index_of(std::int64_t raw) const;
  std::int64_t raw_of(std::uint32_t index) const;

  static Catalog identity(std::size_t item_count);
};

// Per-user chronological sequences with leave-one-out roles: everything up
// to the last two items trains, the penultimate item validates, the last
// item tests. Sequences are kept whole so the roles are views.
struct SequenceDataset {
  Catalog catalog;
  std::vector<std::int64_t> user_ids;                 // ascending
  std::vector<std::vector<std::uint32_t>> sequences;  // full, per user
  std::size_t dropped_users = 0;                      // below min length at split time

  std::size_t user_count() const { return sequences.size(); }
  std::size_t item_count() const { return catalog.item_count(); }

  std::span<const std::uint32_t> train_prefix(std::size_t user) const {
    const auto& seq = sequences[user];
    return std::span<const std::uint32_t>(seq.data(), seq.size() - 2);
  }
  // History available when predicting the test item: prefix plus the
  // validation item.
  std::span<const std::uint32_t> test_history(std::size_t user) const {
    const auto& seq = sequences[user];
    return std::span<const std::uint32_t>(seq.data(), seq.size() - 1);
  }
  std::uint32_t val_target(std::size_t user) const {
    return sequences[user][sequences[user].size() - 2];
  }
  std::uint32_t test_target(std::size_t user) const {
    return sequences[user].back();
  }
};

// Parses `user<TAB>item<TAB>timestamp` lines; preserves input order.
std::vector<Interaction> load_interactions(const std::filesystem::path& path);

// Removes users and items with fewer than k interactions, iterated to a
// fixed point.
std::vector<Interaction> k_core_filter(std::vector<Interaction> log, int k);

SequenceDataset leave_one_out_split(std::span<const Interaction> log, int min_len = 3);

// Synthetic sequences over a hidden permutation cycle: each step follows
// the cycle with probability self_consistency, otherwise jumps uniformly.
SequenceDataset generate_markov_dataset(int n_users, int n_items,
                                        std::pair<int, int> seq_len_range,
                                        double self_consistency, std::uint64_t seed);

nlohmann::json dataset_to_json(const SequenceDataset& dataset);
SequenceDataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const SequenceDataset& dataset, const std::filesystem::path& path);
SequenceDataset load_dataset(const std::filesystem::path& path);

}  // namespace rankloss
