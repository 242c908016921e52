#include "rankloss/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "rankloss/rng.hpp"

namespace rankloss {

std::uint32_t Catalog::index_of(std::int64_t raw) const {
  const auto it = raw_to_index.find(raw);
  if (it == raw_to_index.end()) {
    throw DataError("unknown item id " + std::to_string(raw));
  }
  return it->second;
}

std::int64_t Catalog::raw_of(std::uint32_t index) const {
  if (index >= index_to_raw.size()) {
    throw DataError("item index " + std::to_string(index) + " out of range");
  }
  return index_to_raw[index];
}

Catalog Catalog::identity(std::size_t item_count) {
  Catalog catalog;
  catalog.index_to_raw.resize(item_count);
  catalog.raw_to_index.reserve(item_count);
  for (std::size_t i = 0; i < item_count; ++i) {
    catalog.index_to_raw[i] = static_cast<std::int64_t>(i);
    catalog.raw_to_index.emplace(static_cast<std::int64_t>(i), static_cast<std::uint32_t>(i));
  }
  return catalog;
}

namespace {

std::int64_t parse_int_field(std::string_view field, std::size_t line_no, const char* name) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + name + " field '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<Interaction> load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<Interaction> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw DataError("line " + std::to_string(line_no) +
                      ": expected user<TAB>item<TAB>timestamp");
    }
    std::string_view view(line);
    Interaction row;
    row.user_id = parse_int_field(view.substr(0, tab1), line_no, "user");
    row.item_id = parse_int_field(view.substr(tab1 + 1, tab2 - tab1 - 1), line_no, "item");
    row.timestamp = parse_int_field(view.substr(tab2 + 1), line_no, "timestamp");
    if (row.user_id < 0 || row.item_id < 0 || row.timestamp < 0) {
      throw DataError("line " + std::to_string(line_no) + ": negative field");
    }
    log.push_back(row);
  }
  if (log.empty()) {
    throw DataError("no interactions in " + path.string());
  }
  return log;
}

std::vector<Interaction> k_core_filter(std::vector<Interaction> log, int k) {
  if (k < 1) {
    throw std::invalid_argument("k_core_filter: k must be >= 1");
  }
  bool changed = true;
  while (changed) {
    std::unordered_map<std::int64_t, int> user_count;
    std::unordered_map<std::int64_t, int> item_count;
    for (const auto& row : log) {
      ++user_count[row.user_id];
      ++item_count[row.item_id];
    }
    std::vector<Interaction> kept;
    kept.reserve(log.size());
    for (const auto& row : log) {
      if (user_count[row.user_id] >= k && item_count[row.item_id] >= k) {
        kept.push_back(row);
      }
    }
    changed = kept.size() != log.size();
    log = std::move(kept);
    if (log.empty()) {
      throw DataError("empty after k-core");
    }
  }
  return log;
}

SequenceDataset leave_one_out_split(std::span<const Interaction> log, int min_len) {
  if (min_len < 3) {
    throw std::invalid_argument("leave_one_out_split: min_len must be >= 3");
  }

  // Dense indices in order of first appearance in the log.
  Catalog catalog;
  for (const auto& row : log) {
    if (catalog.raw_to_index.emplace(row.item_id,
                                     static_cast<std::uint32_t>(catalog.index_to_raw.size()))
            .second) {
      catalog.index_to_raw.push_back(row.item_id);
    }
  }

  // Group per user, keeping input order so the stable timestamp sort breaks
  // ties by file position.
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, std::uint32_t>>> per_user;
  for (const auto& row : log) {
    per_user[row.user_id].emplace_back(row.timestamp, catalog.index_of(row.item_id));
  }

  SequenceDataset dataset;
  dataset.catalog = std::move(catalog);
  for (auto& [user, rows] : per_user) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (rows.size() < static_cast<std::size_t>(min_len)) {
      ++dataset.dropped_users;
      continue;
    }
    std::vector<std::uint32_t> seq;
    seq.reserve(rows.size());
    for (const auto& [ts, item] : rows) {
      seq.push_back(item);
    }
    dataset.user_ids.push_back(user);
    dataset.sequences.push_back(std::move(seq));
  }
  if (dataset.sequences.empty()) {
    throw DataError("no user reaches the minimum sequence length");
  }
  return dataset;
}

SequenceDataset generate_markov_dataset(int n_users, int n_items,
                                        std::pair<int, int> seq_len_range,
                                        double self_consistency, std::uint64_t seed) {
  if (n_items < 10) {
    throw std::invalid_argument("generate_markov_dataset: need at least 10 items");
  }
  if (n_users < 1) {
    throw std::invalid_argument("generate_markov_dataset: need at least 1 user");
  }
  if (self_consistency < 0.0 || self_consistency > 1.0) {
    throw std::invalid_argument("generate_markov_dataset: self_consistency must be in [0,1]");
  }
  if (seq_len_range.first < 3 || seq_len_range.second < seq_len_range.first) {
    throw std::invalid_argument("generate_markov_dataset: bad length range (min >= 3)");
  }

  Rng rng = Rng::derive(seed, 0);

  // Hidden cycle: successor[perm[i]] = perm[(i+1) % n].
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i) {
    perm[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  }
  std::vector<std::uint32_t> successor(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    successor[perm[i]] = perm[(i + 1) % perm.size()];
  }

  SequenceDataset dataset;
  dataset.catalog = Catalog::identity(static_cast<std::size_t>(n_items));
  dataset.user_ids.resize(static_cast<std::size_t>(n_users));
  dataset.sequences.resize(static_cast<std::size_t>(n_users));
  const std::uint64_t span =
      static_cast<std::uint64_t>(seq_len_range.second - seq_len_range.first) + 1;
  for (int u = 0; u < n_users; ++u) {
    const std::size_t len =
        static_cast<std::size_t>(seq_len_range.first) + rng.uniform_index(span);
    std::vector<std::uint32_t> seq;
    seq.reserve(len);
    std::uint32_t cur = static_cast<std::uint32_t>(rng.uniform_index(n_items));
    seq.push_back(cur);
    for (std::size_t t = 1; t < len; ++t) {
      if (rng.uniform_real() < self_consistency) {
        cur = successor[cur];
      } else {
        cur = static_cast<std::uint32_t>(rng.uniform_index(n_items));
      }
      seq.push_back(cur);
    }
    dataset.user_ids[static_cast<std::size_t>(u)] = u;
    dataset.sequences[static_cast<std::size_t>(u)] = std::move(seq);
  }
  return dataset;
}

nlohmann::json dataset_to_json(const SequenceDataset& dataset) {
  nlohmann::json sequences = nlohmann::json::object();
  nlohmann::json val = nlohmann::json::object();
  nlohmann::json test = nlohmann::json::object();
  for (std::size_t u = 0; u < dataset.user_count(); ++u) {
    const std::string key = std::to_string(dataset.user_ids[u]);
    const auto prefix = dataset.train_prefix(u);
    sequences[key] = std::vector<std::uint32_t>(prefix.begin(), prefix.end());
    val[key] = dataset.val_target(u);
    test[key] = dataset.test_target(u);
  }
  return nlohmann::json{{"item_count", dataset.item_count()},
                        {"sequences", std::move(sequences)},
                        {"val_targets", std::move(val)},
                        {"test_targets", std::move(test)}};
}

SequenceDataset dataset_from_json(const nlohmann::json& j) {
  SequenceDataset dataset;
  const std::size_t item_count = j.at("item_count").get<std::size_t>();
  dataset.catalog = Catalog::identity(item_count);

  const auto& sequences = j.at("sequences");
  const auto& val = j.at("val_targets");
  const auto& test = j.at("test_targets");

  std::vector<std::int64_t> users;
  users.reserve(sequences.size());
  for (const auto& [key, value] : sequences.items()) {
    users.push_back(std::stoll(key));
  }
  std::sort(users.begin(), users.end());

  for (std::int64_t user : users) {
    const std::string key = std::to_string(user);
    auto seq = sequences.at(key).get<std::vector<std::uint32_t>>();
    seq.push_back(val.at(key).get<std::uint32_t>());
    seq.push_back(test.at(key).get<std::uint32_t>());
    if (seq.size() < 3) {
      throw DataError("user " + key + ": sequence too short");
    }
    for (std::uint32_t item : seq) {
      if (item >= item_count) {
        throw DataError("user " + key + ": item index out of range");
      }
    }
    dataset.user_ids.push_back(user);
    dataset.sequences.push_back(std::move(seq));
  }
  if (dataset.sequences.empty()) {
    throw DataError("dataset has no users");
  }
  return dataset;
}

void save_dataset(const SequenceDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << dataset_to_json(dataset).dump() << '\n';
}

SequenceDataset load_dataset(const std::filesystem::path& path) {
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
  try {
    return dataset_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace rankloss
