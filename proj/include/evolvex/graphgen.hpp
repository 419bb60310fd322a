#pragma once

// Synthetic temporal social networks with planted homophily, triadic closure
// and neighbour-driven interest drift.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evolvex/types.hpp"

namespace evolvex {

inline constexpr int kDatasetSchemaVersion = 1;

std::vector<std::string> default_categories();

struct Vocabularies {
  std::vector<std::string> genders;
  std::vector<std::string> occupations;
  std::vector<std::string> locations;  // country codes

  static Vocabularies defaults();
  bool operator==(const Vocabularies&) const = default;
};

struct DemographicProfile {
  int age = 0;
  int gender = 0;
  int occupation = 0;
  int location = 0;

  bool operator==(const DemographicProfile&) const = default;
};

struct Post {
  int category = 0;
  std::string text;
  int step = 0;

  bool operator==(const Post&) const = default;
};

struct EngagementCounts {
  long reactions = 0;
  long comments = 0;
  long shares = 0;

  bool operator==(const EngagementCounts&) const = default;
};

// One entry per category, in vocabulary order.
struct EngagementRecord {
  std::vector<EngagementCounts> per_category;

  bool all_zero() const;
  bool operator==(const EngagementRecord&) const = default;
};

// Dense binary adjacency. Undirected graphs keep both triangles in sync and
// never store self loops.
class Adjacency {
 public:
  Adjacency() = default;
  Adjacency(int n, bool directed);

  int size() const { return n_; }
  bool directed() const { return directed_; }
  bool has(int i, int j) const { return cells_[index(i, j)] != 0; }
  void add(int i, int j);
  void remove(int i, int j);

  std::vector<int> neighbors(int i) const;
  int degree(int i) const;
  // Undirected graphs list each edge once with i < j.
  std::vector<std::pair<int, int>> edges() const;
  std::size_t edge_count() const;
  bool has_common_neighbor(int i, int j) const;
  Mat to_matrix() const;

  bool operator==(const Adjacency&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  bool directed_ = false;
  std::vector<std::uint8_t> cells_;
};

struct Snapshot {
  int step = 0;
  Adjacency adjacency;
  std::vector<std::vector<Post>> posts;       // per user
  std::vector<EngagementRecord> engagement;   // per user

  bool operator==(const Snapshot&) const = default;
};

// Profiles are static over time, so they live on the dataset rather than on
// each snapshot.
struct TemporalDataset {
  std::uint64_t seed = 0;
  bool directed = false;
  std::vector<std::string> categories;
  Vocabularies vocabularies;
  std::vector<DemographicProfile> profiles;
  std::vector<Snapshot> snapshots;
  // Number of trailing steps held out as the forecast target (0 = none).
  int holdout = 0;

  int users() const { return static_cast<int>(profiles.size()); }
  int steps() const { return static_cast<int>(snapshots.size()); }
  int category_count() const { return static_cast<int>(categories.size()); }
  // Per-category post counts of one user at one snapshot.
  std::vector<double> category_counts(int snapshot, int user) const;

  bool operator==(const TemporalDataset&) const = default;
};

struct GeneratorConfig {
  int users = 24;
  int steps = 8;
  double homophily = 0.8;
  double closure = 0.03;
  double drift = 0.5;
  bool directed = false;
  std::vector<std::string> categories = default_categories();
  Vocabularies vocabularies = Vocabularies::defaults();

  // Initial edge density scale and per-step spontaneous tie formation.
  double base_edge_rate = 0.007;
  double formation_rate = 0.0015;
  // Spread of the log-normal sociability that drives degree heterogeneity.
  double sociability_spread = 1.8;
  // Per-user mean post volume is drawn from [min_posts, max_posts].
  int min_posts = 10;
  int max_posts = 20;

  void validate() const;
};

// Latent interest mixtures, recorded per step when requested.
struct GeneratorTrace {
  std::vector<std::vector<std::vector<double>>> mixtures;  // [step][user][category]
};

TemporalDataset generate(const GeneratorConfig& config, std::uint64_t seed, GeneratorTrace* trace = nullptr);

// Splits off the final `horizon` snapshots as the target.
std::pair<TemporalDataset, TemporalDataset> split_dataset(const TemporalDataset& ds, int horizon = 4);
// Copy of ds with the final `horizon` snapshots marked as held out.
TemporalDataset mark_holdout(const TemporalDataset& ds, int horizon = 4);
// The snapshots before the held-out tail (the whole dataset if none is marked).
TemporalDataset conditioning_part(const TemporalDataset& ds);

nlohmann::json dataset_to_json(const TemporalDataset& ds);
TemporalDataset dataset_from_json(const nlohmann::json& doc);
void save_dataset(const TemporalDataset& ds, const std::string& path);
TemporalDataset load_dataset(const std::string& path);

}  // namespace evolvex
