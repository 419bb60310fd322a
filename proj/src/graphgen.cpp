#include "evolvex/graphgen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "evolvex/rng.hpp"

namespace evolvex {

namespace {

using nlohmann::json;

constexpr std::array<std::array<const char*, 10>, 8> kKeywordPools = {{
    {"election", "policy", "senate", "vote", "debate", "campaign", "parliament", "reform", "governor", "ballot"},
    {"university", "lecture", "exam", "student", "research", "classroom", "degree", "teacher", "scholarship", "library"},
    {"football", "match", "goal", "league", "tournament", "coach", "marathon", "basketball", "stadium", "training"},
    {"flight", "beach", "hotel", "passport", "itinerary", "mountains", "backpacking", "airport", "sightseeing", "roadtrip"},
    {"movie", "concert", "album", "series", "festival", "celebrity", "premiere", "comedy", "streaming", "theater"},
    {"fitness", "nutrition", "wellness", "doctor", "vaccine", "workout", "sleep", "therapy", "hospital", "diet"},
    {"software", "startup", "smartphone", "robotics", "coding", "gadget", "cloud", "algorithm", "hardware", "ai"},
    {"fashion", "recipe", "coffee", "garden", "home", "style", "weekend", "shopping", "pets", "decor"},
}};

constexpr std::array<const char*, 10> kFillers = {"today", "really", "great", "new", "love",
                                                  "thoughts", "big", "amazing", "week", "check"};
constexpr std::array<const char*, 12> kStopWords = {"the", "and", "a", "of", "to", "in",
                                                    "is", "with", "for", "on", "this", "my"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Keyword pool for a category; names outside the default vocabulary get
// synthetic tokens derived from the name.
std::vector<std::string> keyword_pool(const std::string& name) {
  const auto defaults = default_categories();
  std::vector<std::string> pool;
  for (std::size_t c = 0; c < defaults.size(); ++c) {
    if (defaults[c] == name) {
      for (const char* w : kKeywordPools[c]) pool.emplace_back(w);
      return pool;
    }
  }
  std::string stem;
  for (char ch : lower(name)) {
    if (std::isalnum(static_cast<unsigned char>(ch))) stem.push_back(ch);
  }
  for (int k = 0; k < 10; ++k) pool.push_back(fmt::format("{}{}", stem, k));
  return pool;
}

std::string make_post_text(const std::vector<std::string>& pool, Rng& rng) {
  std::vector<std::string> words;
  for (int k = 0; k < 3; ++k) words.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
  for (int k = 0; k < 2; ++k) words.emplace_back(kFillers[rng.uniform_int(0, kFillers.size() - 1)]);
  for (int k = 0; k < 2; ++k) words.emplace_back(kStopWords[rng.uniform_int(0, kStopWords.size() - 1)]);
  for (std::size_t k = words.size() - 1; k > 0; --k) {
    std::swap(words[k], words[rng.uniform_int(0, static_cast<int>(k))]);
  }
  std::string text;
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (k > 0) text += (k == 3 && rng.uniform() < 0.5) ? ", " : " ";
    text += words[k];
  }
  text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  text += rng.uniform() < 0.5 ? "!" : ".";
  return text;
}

void normalize(std::vector<double>& v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return;
  }
  for (auto& x : v) x /= total;
}

int sample_category(const std::vector<double>& mixture, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < mixture.size(); ++c) {
    acc += mixture[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(mixture.size()) - 1;
}

void check_unit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(fmt::format("{} must lie in [0, 1], got {}", name, value));
  }
}

}  // namespace

std::vector<std::string> default_categories() {
  return {"Politics", "Education", "Sports", "Travel", "Entertainment", "Health", "Technology", "Lifestyle"};
}

Vocabularies Vocabularies::defaults() {
  return {
      {"female", "male", "nonbinary"},
      {"student", "engineer", "teacher", "artist", "healthcare", "sales"},
      {"US", "GB", "IN", "BR", "DE", "JP"},
  };
}

bool EngagementRecord::all_zero() const {
  return std::all_of(per_category.begin(), per_category.end(), [](const EngagementCounts& c) {
    return c.reactions == 0 && c.comments == 0 && c.shares == 0;
  });
}

Adjacency::Adjacency(int n, bool directed)
    : n_(n), directed_(directed), cells_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

void Adjacency::add(int i, int j) {
  if (i == j) return;
  cells_[index(i, j)] = 1;
  if (!directed_) cells_[index(j, i)] = 1;
}

void Adjacency::remove(int i, int j) {
  cells_[index(i, j)] = 0;
  if (!directed_) cells_[index(j, i)] = 0;
}

std::vector<int> Adjacency::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j) {
    if (has(i, j)) out.push_back(j);
  }
  return out;
}

int Adjacency::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n_; ++j) d += has(i, j) ? 1 : 0;
  return d;
}

std::vector<std::pair<int, int>> Adjacency::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n_; ++i) {
    for (int j = directed_ ? 0 : i + 1; j < n_; ++j) {
      if (has(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

std::size_t Adjacency::edge_count() const { return edges().size(); }

bool Adjacency::has_common_neighbor(int i, int j) const {
  for (int k = 0; k < n_; ++k) {
    if (k != i && k != j && has(i, k) && has(k, j)) return true;
  }
  return false;
}

Mat Adjacency::to_matrix() const {
  Mat m = Mat::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) m(i, j) = has(i, j) ? 1.0 : 0.0;
  }
  return m;
}

std::vector<double> TemporalDataset::category_counts(int snapshot, int user) const {
  std::vector<double> counts(categories.size(), 0.0);
  for (const auto& post : snapshots.at(snapshot).posts.at(user)) counts.at(post.category) += 1.0;
  return counts;
}

void GeneratorConfig::validate() const {
  if (users < 4) throw ConfigError(fmt::format("users must be >= 4, got {}", users));
  if (steps < 5) throw ConfigError(fmt::format("steps must be >= 5, got {}", steps));
  check_unit(homophily, "homophily");
  check_unit(closure, "closure");
  check_unit(drift, "drift");
  if (categories.size() < 2) throw ConfigError("at least two activity categories are required");
  if (vocabularies.genders.empty() || vocabularies.occupations.empty() || vocabularies.locations.empty()) {
    throw ConfigError("demographic vocabularies must be non-empty");
  }
  if (min_posts < 1 || max_posts < min_posts) throw ConfigError("post volume range must satisfy 1 <= min <= max");
  if (base_edge_rate < 0.0 || formation_rate < 0.0 || sociability_spread < 0.0) {
    throw ConfigError("edge rates and sociability spread must be non-negative");
  }
}

TemporalDataset generate(const GeneratorConfig& config, std::uint64_t seed, GeneratorTrace* trace) {
  config.validate();

  const int n = config.users;
  const int k = static_cast<int>(config.categories.size());
  const auto& vocab = config.vocabularies;

  Rng attr(derive_seed(seed, 1));
  Rng edge_rng(derive_seed(seed, 2));
  Rng activity(derive_seed(seed, 3));
  Rng text_rng(derive_seed(seed, 4));

  TemporalDataset ds;
  ds.seed = seed;
  ds.directed = config.directed;
  ds.categories = config.categories;
  ds.vocabularies = vocab;

  // Latent per-user state that is never written out.
  std::vector<double> sociability(n);
  std::vector<int> volume(n);
  std::vector<double> gate(n);
  std::vector<std::vector<double>> mixture(n, std::vector<double>(k));

  for (int i = 0; i < n; ++i) {
    DemographicProfile p;
    p.age = attr.uniform_int(16, 70);
    p.gender = attr.uniform_int(0, static_cast<int>(vocab.genders.size()) - 1);
    p.occupation = attr.uniform_int(0, static_cast<int>(vocab.occupations.size()) - 1);
    p.location = attr.uniform_int(0, static_cast<int>(vocab.locations.size()) - 1);
    ds.profiles.push_back(p);

    sociability[i] = std::exp(config.sociability_spread * attr.normal());
    volume[i] = attr.uniform_int(config.min_posts, config.max_posts);
    // Younger users follow what they engage with; older users keep habits.
    gate[i] = p.age < 30 ? 0.9 : 0.1;

    auto& m = mixture[i];
    for (int c = 0; c < k; ++c) m[c] = 0.02 + 0.06 * attr.uniform();
    m[p.occupation % k] += 1.0;
    m[(3 * p.occupation + 1) % k] += 0.35;
    normalize(m);
  }

  auto homophily_factor = [&](int i, int j) {
    const auto& a = ds.profiles[i];
    const auto& b = ds.profiles[j];
    const int shared = (a.location == b.location ? 1 : 0) + (a.occupation == b.occupation ? 1 : 0);
    return 1.0 + 1.5 * config.homophily * shared;
  };

  auto for_each_pair = [&](auto&& fn) {
    for (int i = 0; i < n; ++i) {
      for (int j = config.directed ? 0 : i + 1; j < n; ++j) {
        if (i != j) fn(i, j);
      }
    }
  };

  Adjacency adjacency(n, config.directed);
  for_each_pair([&](int i, int j) {
    const double u = edge_rng.uniform();
    const double p = std::min(1.0, config.base_edge_rate * sociability[i] * sociability[j] * homophily_factor(i, j));
    if (u < p) adjacency.add(i, j);
  });

  std::vector<std::vector<std::string>> pools;
  for (const auto& name : config.categories) pools.push_back(keyword_pool(name));

  for (int t = 0; t < config.steps; ++t) {
    if (trace) trace->mixtures.push_back(mixture);
    Snapshot snap;
    snap.step = t + 1;
    snap.adjacency = adjacency;
    snap.posts.resize(n);
    snap.engagement.resize(n);

    std::vector<std::vector<double>> engaged(n, std::vector<double>(k, 0.0));
    for (int i = 0; i < n; ++i) {
      const int count = std::max(1, volume[i] + activity.uniform_int(-2, 2));
      for (int p = 0; p < count; ++p) {
        const int c = sample_category(mixture[i], activity);
        snap.posts[i].push_back(Post{c, make_post_text(pools[c], text_rng), t + 1});
      }

      // Engagement concentrates on a focus category that changes every
      // step; volume grows with the number of connections.
      const int focus = activity.uniform_int(0, k - 1);
      std::vector<double> interest(k);
      for (int c = 0; c < k; ++c) interest[c] = 0.1 * mixture[i][c] + (c == focus ? 0.9 : 0.0);
      const double reach = 1.0 + adjacency.degree(i);
      auto& rec = snap.engagement[i];
      rec.per_category.resize(k);
      for (int c = 0; c < k; ++c) {
        rec.per_category[c].reactions = activity.poisson(3.0 * interest[c] * reach);
        rec.per_category[c].comments = activity.poisson(1.2 * interest[c] * reach);
        rec.per_category[c].shares = activity.poisson(0.5 * interest[c] * reach);
        engaged[i][c] = static_cast<double>(rec.per_category[c].reactions + rec.per_category[c].comments +
                                            rec.per_category[c].shares);
      }
      if (std::accumulate(engaged[i].begin(), engaged[i].end(), 0.0) <= 0.0) engaged[i] = interest;
      normalize(engaged[i]);
    }
    ds.snapshots.push_back(std::move(snap));
    if (t + 1 == config.steps) break;

    // Interest drift toward the closed-neighbourhood mean.
    std::vector<std::vector<double>> next(n, std::vector<double>(k));
    for (int i = 0; i < n; ++i) {
      std::vector<double> own(k);
      for (int c = 0; c < k; ++c) own[c] = gate[i] * engaged[i][c] + (1.0 - gate[i]) * mixture[i][c];
      normalize(own);
      std::vector<double> around = mixture[i];
      const auto nbrs = adjacency.neighbors(i);
      for (int j : nbrs) {
        for (int c = 0; c < k; ++c) around[c] += mixture[j][c];
      }
      for (auto& x : around) x /= static_cast<double>(nbrs.size() + 1);
      for (int c = 0; c < k; ++c) next[i][c] = (1.0 - config.drift) * own[c] + config.drift * around[c];
      normalize(next[i]);
    }
    mixture = std::move(next);

    // Both uniforms are consumed for every pair so that runs differing only
    // in closure probability stay coupled (edge sets nest).
    Adjacency grown = adjacency;
    for_each_pair([&](int i, int j) {
      const double u_form = edge_rng.uniform();
      const double u_close = edge_rng.uniform();
      if (adjacency.has(i, j)) return;
      const double p_form =
          std::min(1.0, config.formation_rate * sociability[i] * sociability[j] * homophily_factor(i, j));
      if (u_form < p_form || (u_close < config.closure && adjacency.has_common_neighbor(i, j))) grown.add(i, j);
    });
    adjacency = std::move(grown);
  }
  return ds;
}

std::pair<TemporalDataset, TemporalDataset> split_dataset(const TemporalDataset& ds, int horizon) {
  if (horizon < 1) throw ConfigError(fmt::format("horizon must be >= 1, got {}", horizon));
  if (horizon >= ds.steps()) {
    throw ConfigError(fmt::format("horizon {} leaves no conditioning steps out of {}", horizon, ds.steps()));
  }
  TemporalDataset conditioning = ds;
  TemporalDataset target = ds;
  const auto cut = ds.snapshots.begin() + (ds.steps() - horizon);
  conditioning.snapshots.assign(ds.snapshots.begin(), cut);
  target.snapshots.assign(cut, ds.snapshots.end());
  conditioning.holdout = 0;
  target.holdout = horizon;
  return {std::move(conditioning), std::move(target)};
}

TemporalDataset mark_holdout(const TemporalDataset& ds, int horizon) {
  if (horizon < 1 || horizon >= ds.steps()) {
    throw ConfigError(fmt::format("horizon must lie in [1, {}], got {}", ds.steps() - 1, horizon));
  }
  TemporalDataset out = ds;
  out.holdout = horizon;
  return out;
}

TemporalDataset conditioning_part(const TemporalDataset& ds) {
  if (ds.holdout == 0) return ds;
  return split_dataset(ds, ds.holdout).first;
}

json dataset_to_json(const TemporalDataset& ds) {
  json users = json::array();
  for (int i = 0; i < ds.users(); ++i) {
    const auto& p = ds.profiles[i];
    users.push_back({{"id", i},
                     {"profile",
                      {{"age", p.age}, {"gender", p.gender}, {"occupation", p.occupation}, {"location", p.location}}}});
  }
  json snapshots = json::array();
  for (const auto& snap : ds.snapshots) {
    json edges = json::array();
    for (auto [i, j] : snap.adjacency.edges()) edges.push_back({i, j});
    json posts = json::array();
    for (const auto& user_posts : snap.posts) {
      json list = json::array();
      for (const auto& post : user_posts) list.push_back({{"category", post.category}, {"text", post.text}});
      posts.push_back(std::move(list));
    }
    json engagement = json::array();
    for (const auto& rec : snap.engagement) {
      json cats = json::array();
      for (const auto& c : rec.per_category) cats.push_back({c.reactions, c.comments, c.shares});
      engagement.push_back(std::move(cats));
    }
    snapshots.push_back({{"step", snap.step},
                         {"edges", std::move(edges)},
                         {"posts", std::move(posts)},
                         {"engagement", std::move(engagement)}});
  }
  return {{"schema_version", kDatasetSchemaVersion},
          {"seed", ds.seed},
          {"directed", ds.directed},
          {"holdout", ds.holdout},
          {"category_vocabulary", ds.categories},
          {"vocabularies",
           {{"gender", ds.vocabularies.genders},
            {"occupation", ds.vocabularies.occupations},
            {"location", ds.vocabularies.locations}}},
          {"users", std::move(users)},
          {"snapshots", std::move(snapshots)}};
}

TemporalDataset dataset_from_json(const json& doc) {
  const int version = doc.at("schema_version").get<int>();
  if (version != kDatasetSchemaVersion) {
    throw std::runtime_error(fmt::format("unsupported dataset schema_version {}", version));
  }
  TemporalDataset ds;
  ds.seed = doc.at("seed").get<std::uint64_t>();
  ds.directed = doc.value("directed", false);
  ds.holdout = doc.value("holdout", 0);
  ds.categories = doc.at("category_vocabulary").get<std::vector<std::string>>();
  const auto& vocab = doc.at("vocabularies");
  ds.vocabularies.genders = vocab.at("gender").get<std::vector<std::string>>();
  ds.vocabularies.occupations = vocab.at("occupation").get<std::vector<std::string>>();
  ds.vocabularies.locations = vocab.at("location").get<std::vector<std::string>>();

  const auto& users = doc.at("users");
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i].at("id").get<int>() != static_cast<int>(i)) throw std::runtime_error("user ids must be 0..N-1");
    const auto& p = users[i].at("profile");
    ds.profiles.push_back({p.at("age").get<int>(), p.at("gender").get<int>(), p.at("occupation").get<int>(),
                           p.at("location").get<int>()});
  }
  const int n = ds.users();
  const int k = ds.category_count();
  for (const auto& s : doc.at("snapshots")) {
    Snapshot snap;
    snap.step = s.at("step").get<int>();
    snap.adjacency = Adjacency(n, ds.directed);
    for (const auto& e : s.at("edges")) snap.adjacency.add(e.at(0).get<int>(), e.at(1).get<int>());
    const auto& posts = s.at("posts");
    const auto& engagement = s.at("engagement");
    if (static_cast<int>(posts.size()) != n || static_cast<int>(engagement.size()) != n) {
      throw std::runtime_error("snapshot user count does not match the users table");
    }
    snap.posts.resize(n);
    for (int i = 0; i < n; ++i) {
      for (const auto& p : posts[i]) {
        const int c = p.at("category").get<int>();
        if (c < 0 || c >= k) throw std::runtime_error("post category out of range");
        snap.posts[i].push_back(Post{c, p.at("text").get<std::string>(), snap.step});
      }
      EngagementRecord rec;
      for (const auto& c : engagement[i]) {
        rec.per_category.push_back({c.at(0).get<long>(), c.at(1).get<long>(), c.at(2).get<long>()});
      }
      if (static_cast<int>(rec.per_category.size()) != k) throw std::runtime_error("engagement category mismatch");
      snap.engagement.push_back(std::move(rec));
    }
    ds.snapshots.push_back(std::move(snap));
  }
  return ds;
}

void save_dataset(const TemporalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << dataset_to_json(ds).dump(1) << '\n';
}

TemporalDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset " + path);
  return dataset_from_json(json::parse(in));
}

}  // namespace evolvex
