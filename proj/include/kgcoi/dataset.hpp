#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgcoi/graph.hpp"

namespace kgcoi {

/// "Can we hypothesize a key relation between {head} and {tail}?"
std::string question_text(std::string_view head_name, std::string_view tail_name);

/// Seeded generator with a fixed bounded-draw rule, so sampling streams are
/// identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

struct BuilderConfig {
  std::size_t per_class = 100;
  std::uint64_t seed = 0;
  std::size_t max_walk = 10;
  double threshold = 0.5;
  std::size_t restart_budget = 10000;

  /// Throws InvalidArgument.
  void validate() const;
};

struct DatasetInstance {
  std::string id;
  EntityId head;
  EntityId tail;
  std::string head_name;
  std::string tail_name;
  Label label = Label::no_relation;
  std::string question;
  MaskSpec mask;
  std::vector<EntityId> provenance;  // walk trace, or the drawn pair

  bool operator==(const DatasetInstance&) const;
};

/// Unordered entity pairs already used by a dataset, smaller id first.
using PairSet = std::set<std::pair<std::string, std::string>>;
std::pair<std::string, std::string> pair_key(const EntityId& a, const EntityId& b);

/// Sum of n_pubs over direct triples between a and b whose polarity is
/// `label`, in either orientation.
std::uint64_t polar_pubs(const KnowledgeGraph& g, const EntityId& a, const EntityId& b,
                         Label label);

/// Publication-weighted walk from a random start. At each node the incident
/// triples are scanned in canonical order; the first stimulate/inhibit triple
/// whose label is wanted, whose pair is unused and whose opposite polarity
/// has fewer than threshold x n_pubs publications is taken. Otherwise the
/// walk moves along the best triple to an unvisited node. Dead ends restart.
/// Throws SamplingExhausted after cfg.restart_budget restarts.
DatasetInstance sample_positive(const KnowledgeGraph& g, Rng& rng, const BuilderConfig& cfg,
                                const PairSet& used = {},
                                std::span<const Label> wanted = {});

/// Random pool pairs with no direct triple of any type.
DatasetInstance sample_no_relation(const KnowledgeGraph& g, std::span<const EntityId> pool,
                                   Rng& rng, const BuilderConfig& cfg, const PairSet& used = {});

/// per_class instances of each label, shuffled, ids q0001.. in final order.
std::vector<DatasetInstance> build_dataset(const KnowledgeGraph& g, const BuilderConfig& cfg);

void write_dataset(std::ostream& out, std::span<const DatasetInstance> instances);
void save_dataset(const std::filesystem::path& path, std::span<const DatasetInstance> instances);
std::vector<DatasetInstance> parse_dataset(std::istream& in);
std::vector<DatasetInstance> load_dataset(const std::filesystem::path& path);

}  // namespace kgcoi
