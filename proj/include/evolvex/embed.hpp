#pragma once

// Per-user modality encoders: graph-aware demographics, hashed post text and
// engagement counts plus their textual summary.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolvex/graphgen.hpp"
#include "evolvex/types.hpp"

namespace evolvex {

struct ExternalEncoderConfig {
  std::string url;
  int timeout_ms = 5000;
};

struct EncoderConfig {
  int dim = 32;
  int gnn_layers = 2;
  bool remove_stop_words = true;
  std::optional<ExternalEncoderConfig> external;
};

struct DemographicStats {
  double age_mean = 0.0;
  double age_std = 0.0;
};

// Statistics come from the conditioning steps only; with static profiles that
// is the user table of the conditioning dataset.
DemographicStats fit_demographic_stats(const TemporalDataset& conditioning);

// Rows are users: [z(age) | one-hot gender | one-hot occupation | one-hot location].
Mat preprocess_demographics(std::span<const DemographicProfile> profiles, const DemographicStats& stats,
                            const Vocabularies& vocab);

struct GnnLayer {
  Mat w_self;
  Mat w_nbr;
  Vec bias;
};

// Mean-aggregation message passing with tanh activation.
struct GnnParams {
  std::vector<GnnLayer> layers;

  int input_width() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w_self.cols()); }
  int output_width() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w_self.rows()); }

  static GnnParams init(int input_width, int output_width, int layer_count, std::uint64_t seed);
};

// h <- tanh(W_self x_i + W_nbr mean_{j in N(i)} x_j + b), once per layer. An
// isolated node aggregates the zero vector.
Mat embed_demographics(const Adjacency& adjacency, const Mat& features, const GnnParams& params);

std::vector<std::string> tokenize(std::string_view text, bool remove_stop_words);
// Signed feature hashing of the token bag followed by L2 normalisation.
Vec embed_text(std::string_view text, int dim, bool remove_stop_words = true);
Vec embed_posts(std::span<const Post> posts, int dim, bool remove_stop_words = true);
// Unnormalised signed token counts; embed_posts is this vector normalised.
Vec hashed_token_counts(std::span<const Post> posts, int dim, bool remove_stop_words = true);

std::string summarize_engagement(const EngagementRecord& rec, std::span<const std::string> categories);

// Min-max bounds over the 3K count features (reactions, comments, shares per
// category, category-major).
struct EngagementBounds {
  std::vector<double> min;
  std::vector<double> max;
};

EngagementBounds fit_engagement_bounds(const TemporalDataset& conditioning);
Vec scale_engagement(const EngagementRecord& rec, const EngagementBounds& bounds);
// [min-max scaled count block ; hashed summary text]; width 3K + dim.
Vec embed_engagement(const EngagementRecord& rec, const EngagementBounds& bounds,
                     std::span<const std::string> categories, int dim, bool remove_stop_words = true);

// Raw (pre-projection) modality inputs for every user at one step.
struct RawModalities {
  Mat demographic;  // N x d
  Mat posts;        // N x d
  Mat engagement;   // N x (3K + d)
};

// Frozen encoders fitted on conditioning data.
struct Encoder {
  EncoderConfig config;
  DemographicStats stats;
  EngagementBounds bounds;
  GnnParams gnn;
  Vocabularies vocabularies;
  std::vector<std::string> categories;

  static Encoder fit(const TemporalDataset& conditioning, const EncoderConfig& config, std::uint64_t seed);

  int demographic_width() const { return config.dim; }
  int post_width() const { return config.dim; }
  int engagement_width() const { return 3 * static_cast<int>(categories.size()) + config.dim; }

  Mat demographic_block(const Adjacency& adjacency, std::span<const DemographicProfile> profiles) const;
  Mat post_block(std::span<const std::vector<Post>> posts) const;
  Mat engagement_block(std::span<const EngagementRecord> engagement) const;

  RawModalities encode(const Snapshot& snapshot, std::span<const DemographicProfile> profiles) const;
};

nlohmann::json encoder_to_json(const Encoder& encoder);
Encoder encoder_from_json(const nlohmann::json& doc);

}  // namespace evolvex
