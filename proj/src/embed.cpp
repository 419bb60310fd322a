#include "evolvex/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <unordered_set>

#include <fmt/core.h>

#include "evolvex/external.hpp"
#include "evolvex/json_util.hpp"
#include "evolvex/rng.hpp"

namespace evolvex {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "and",  "are", "as",   "at",   "be",   "but",  "by",   "for",  "from", "has",
      "have", "i",    "in",   "is",  "it",   "its",  "my",   "of",   "on",   "or",   "our",  "so",
      "that", "the",  "their", "this", "to", "was",  "we",   "were", "with", "you",  "your",
  };
  return words;
}

void add_token(Vec& acc, const std::string& token) {
  const std::uint64_t h = fnv1a(token);
  const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(acc.size()));
  acc(bucket) += (h >> 63) != 0 ? -1.0 : 1.0;
}

Vec normalized(Vec v) {
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

Mat glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

// Runs the external encoder when configured; on any contract failure logs the
// reason and returns nullopt so the caller uses the built-in hashing.
std::optional<std::vector<Vec>> try_external(const EncoderConfig& config, const std::vector<std::string>& texts) {
  if (!config.external) return std::nullopt;
  try {
    return external_encode(texts, *config.external, config.dim);
  } catch (const ExternalEncodeError& e) {
    std::cerr << "warning: external encoder unavailable, using built-in hashing: " << e.what() << '\n';
    return std::nullopt;
  }
}

}  // namespace

DemographicStats fit_demographic_stats(const TemporalDataset& conditioning) {
  DemographicStats stats;
  const auto n = static_cast<double>(conditioning.users());
  if (n == 0) return stats;
  for (const auto& p : conditioning.profiles) stats.age_mean += p.age;
  stats.age_mean /= n;
  double var = 0.0;
  for (const auto& p : conditioning.profiles) var += (p.age - stats.age_mean) * (p.age - stats.age_mean);
  stats.age_std = std::sqrt(var / n);
  return stats;
}

Mat preprocess_demographics(std::span<const DemographicProfile> profiles, const DemographicStats& stats,
                            const Vocabularies& vocab) {
  const int g = static_cast<int>(vocab.genders.size());
  const int o = static_cast<int>(vocab.occupations.size());
  const int l = static_cast<int>(vocab.locations.size());
  Mat x = Mat::Zero(static_cast<Eigen::Index>(profiles.size()), 1 + g + o + l);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    const auto r = static_cast<Eigen::Index>(i);
    // Zero spread maps to 0 rather than dividing by zero.
    x(r, 0) = stats.age_std > 0.0 ? (p.age - stats.age_mean) / stats.age_std : 0.0;
    if (p.gender < 0 || p.gender >= g || p.occupation < 0 || p.occupation >= o || p.location < 0 ||
        p.location >= l) {
      throw std::out_of_range(fmt::format("profile {} has a code outside its vocabulary", i));
    }
    x(r, 1 + p.gender) = 1.0;
    x(r, 1 + g + p.occupation) = 1.0;
    x(r, 1 + g + o + p.location) = 1.0;
  }
  return x;
}

GnnParams GnnParams::init(int input_width, int output_width, int layer_count, std::uint64_t seed) {
  if (layer_count < 1) throw ConfigError("GNN needs at least one layer");
  Rng rng(derive_seed(seed, 0x6e6e));
  GnnParams params;
  int in = input_width;
  for (int l = 0; l < layer_count; ++l) {
    GnnLayer layer;
    layer.w_self = glorot(output_width, in, rng);
    layer.w_nbr = glorot(output_width, in, rng);
    layer.bias = Vec::Zero(output_width);
    params.layers.push_back(std::move(layer));
    in = output_width;
  }
  return params;
}

Mat embed_demographics(const Adjacency& adjacency, const Mat& features, const GnnParams& params) {
  const int n = adjacency.size();
  if (features.rows() != n) {
    throw std::invalid_argument(
        fmt::format("feature rows ({}) must equal the adjacency order ({})", features.rows(), n));
  }
  if (params.layers.empty() || features.cols() != params.input_width()) {
    throw std::invalid_argument(fmt::format("feature width {} does not match GNN input width {}", features.cols(),
                                            params.input_width()));
  }
  // Row-normalised neighbour averaging operator.
  Mat mean_op = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto nbrs = adjacency.neighbors(i);
    for (int j : nbrs) mean_op(i, j) = 1.0 / static_cast<double>(nbrs.size());
  }
  Mat h = features;
  for (const auto& layer : params.layers) {
    const Mat nbr_mean = mean_op * h;
    Mat pre = h * layer.w_self.transpose() + nbr_mean * layer.w_nbr.transpose();
    pre.rowwise() += layer.bias.transpose();
    h = pre.array().tanh().matrix();
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text, bool remove_stop_words) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !(remove_stop_words && stop_words().contains(current))) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || u >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vec embed_text(std::string_view text, int dim, bool remove_stop_words) {
  Vec acc = Vec::Zero(dim);
  for (const auto& token : tokenize(text, remove_stop_words)) add_token(acc, token);
  return normalized(std::move(acc));
}

Vec hashed_token_counts(std::span<const Post> posts, int dim, bool remove_stop_words) {
  Vec acc = Vec::Zero(dim);
  for (const auto& post : posts) {
    for (const auto& token : tokenize(post.text, remove_stop_words)) add_token(acc, token);
  }
  return acc;
}

Vec embed_posts(std::span<const Post> posts, int dim, bool remove_stop_words) {
  return normalized(hashed_token_counts(posts, dim, remove_stop_words));
}

std::string summarize_engagement(const EngagementRecord& rec, std::span<const std::string> categories) {
  std::string out;
  const auto k = std::min(rec.per_category.size(), categories.size());
  for (std::size_t c = 0; c < k; ++c) {
    const auto& e = rec.per_category[c];
    if (e.reactions == 0 && e.comments == 0 && e.shares == 0) continue;
    if (!out.empty()) out += "; ";
    out += fmt::format("{}: {} reactions, {} comments, {} shares", categories[c], e.reactions, e.comments, e.shares);
  }
  return out.empty() ? "no engagement" : out;
}

EngagementBounds fit_engagement_bounds(const TemporalDataset& conditioning) {
  const auto width = static_cast<std::size_t>(3 * conditioning.category_count());
  EngagementBounds b{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  bool first = true;
  for (const auto& snap : conditioning.snapshots) {
    for (const auto& rec : snap.engagement) {
      for (std::size_t c = 0; c < rec.per_category.size(); ++c) {
        const double v[3] = {static_cast<double>(rec.per_category[c].reactions),
                             static_cast<double>(rec.per_category[c].comments),
                             static_cast<double>(rec.per_category[c].shares)};
        for (std::size_t m = 0; m < 3; ++m) {
          const auto f = 3 * c + m;
          b.min[f] = first ? v[m] : std::min(b.min[f], v[m]);
          b.max[f] = first ? v[m] : std::max(b.max[f], v[m]);
        }
      }
      first = false;
    }
  }
  return b;
}

Vec scale_engagement(const EngagementRecord& rec, const EngagementBounds& bounds) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(bounds.min.size()));
  for (std::size_t c = 0; c < rec.per_category.size() && 3 * c + 2 < bounds.min.size(); ++c) {
    const double v[3] = {static_cast<double>(rec.per_category[c].reactions),
                         static_cast<double>(rec.per_category[c].comments),
                         static_cast<double>(rec.per_category[c].shares)};
    for (std::size_t m = 0; m < 3; ++m) {
      const auto f = 3 * c + m;
      const double span = bounds.max[f] - bounds.min[f];
      out(static_cast<Eigen::Index>(f)) = span > 0.0 ? (v[m] - bounds.min[f]) / span : 0.0;
    }
  }
  return out;
}

Vec embed_engagement(const EngagementRecord& rec, const EngagementBounds& bounds,
                     std::span<const std::string> categories, int dim, bool remove_stop_words) {
  const Vec counts = scale_engagement(rec, bounds);
  Vec out(counts.size() + dim);
  out << counts, embed_text(summarize_engagement(rec, categories), dim, remove_stop_words);
  return out;
}

Encoder Encoder::fit(const TemporalDataset& conditioning, const EncoderConfig& config, std::uint64_t seed) {
  if (config.dim < 1) throw ConfigError("embedding dimension must be >= 1");
  Encoder enc;
  enc.config = config;
  enc.stats = fit_demographic_stats(conditioning);
  enc.bounds = fit_engagement_bounds(conditioning);
  enc.vocabularies = conditioning.vocabularies;
  enc.categories = conditioning.categories;
  const auto& v = conditioning.vocabularies;
  const int width = 1 + static_cast<int>(v.genders.size() + v.occupations.size() + v.locations.size());
  enc.gnn = GnnParams::init(width, config.dim, config.gnn_layers, seed);
  return enc;
}

Mat Encoder::demographic_block(const Adjacency& adjacency, std::span<const DemographicProfile> profiles) const {
  return embed_demographics(adjacency, preprocess_demographics(profiles, stats, vocabularies), gnn);
}

Mat Encoder::post_block(std::span<const std::vector<Post>> posts) const {
  const auto n = static_cast<Eigen::Index>(posts.size());
  Mat out(n, config.dim);
  std::vector<std::string> texts;
  if (config.external) {
    for (const auto& user_posts : posts) {
      std::string joined;
      for (const auto& p : user_posts) joined += (joined.empty() ? "" : "\n") + p.text;
      texts.push_back(std::move(joined));
    }
  }
  if (auto vectors = try_external(config, texts)) {
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = (*vectors)[static_cast<std::size_t>(i)].transpose();
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = embed_posts(posts[static_cast<std::size_t>(i)], config.dim, config.remove_stop_words).transpose();
  }
  return out;
}

Mat Encoder::engagement_block(std::span<const EngagementRecord> engagement) const {
  const auto n = static_cast<Eigen::Index>(engagement.size());
  Mat out(n, engagement_width());
  std::vector<std::string> texts;
  if (config.external) {
    for (const auto& rec : engagement) texts.push_back(summarize_engagement(rec, categories));
  }
  const auto vectors = try_external(config, texts);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = engagement[static_cast<std::size_t>(i)];
    if (vectors) {
      const Vec counts = scale_engagement(rec, bounds);
      out.row(i) << counts.transpose(), (*vectors)[static_cast<std::size_t>(i)].transpose();
    } else {
      out.row(i) = embed_engagement(rec, bounds, categories, config.dim, config.remove_stop_words).transpose();
    }
  }
  return out;
}

RawModalities Encoder::encode(const Snapshot& snapshot, std::span<const DemographicProfile> profiles) const {
  return {demographic_block(snapshot.adjacency, profiles), post_block(snapshot.posts),
          engagement_block(snapshot.engagement)};
}

json encoder_to_json(const Encoder& encoder) {
  json layers = json::array();
  for (const auto& layer : encoder.gnn.layers) {
    layers.push_back({{"w_self", matrix_json(layer.w_self)},
                      {"w_nbr", matrix_json(layer.w_nbr)},
                      {"bias", vector_json(layer.bias)}});
  }
  json doc = {{"dim", encoder.config.dim},
              {"gnn_layers", encoder.config.gnn_layers},
              {"remove_stop_words", encoder.config.remove_stop_words},
              {"age_mean", encoder.stats.age_mean},
              {"age_std", encoder.stats.age_std},
              {"engagement_min", encoder.bounds.min},
              {"engagement_max", encoder.bounds.max},
              {"categories", encoder.categories},
              {"vocabularies",
               {{"gender", encoder.vocabularies.genders},
                {"occupation", encoder.vocabularies.occupations},
                {"location", encoder.vocabularies.locations}}},
              {"gnn", std::move(layers)}};
  if (encoder.config.external) {
    doc["external"] = {{"url", encoder.config.external->url}, {"timeout_ms", encoder.config.external->timeout_ms}};
  }
  return doc;
}

Encoder encoder_from_json(const json& doc) {
  Encoder enc;
  enc.config.dim = doc.at("dim").get<int>();
  enc.config.gnn_layers = doc.at("gnn_layers").get<int>();
  enc.config.remove_stop_words = doc.at("remove_stop_words").get<bool>();
  if (doc.contains("external")) {
    enc.config.external = ExternalEncoderConfig{doc["external"].at("url").get<std::string>(),
                                                doc["external"].at("timeout_ms").get<int>()};
  }
  enc.stats = {doc.at("age_mean").get<double>(), doc.at("age_std").get<double>()};
  enc.bounds = {doc.at("engagement_min").get<std::vector<double>>(), doc.at("engagement_max").get<std::vector<double>>()};
  enc.categories = doc.at("categories").get<std::vector<std::string>>();
  const auto& v = doc.at("vocabularies");
  enc.vocabularies = {v.at("gender").get<std::vector<std::string>>(), v.at("occupation").get<std::vector<std::string>>(),
                      v.at("location").get<std::vector<std::string>>()};
  for (const auto& l : doc.at("gnn")) {
    enc.gnn.layers.push_back({matrix_from(l.at("w_self")), matrix_from(l.at("w_nbr")), vector_from(l.at("bias"))});
  }
  return enc;
}

}  // namespace evolvex
