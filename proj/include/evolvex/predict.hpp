#pragma once

// Feed-forward predictor, link and activity heads, thresholding and ranking.

#include <vector>

#include <json.hpp>

#include "evolvex/graphgen.hpp"
#include "evolvex/types.hpp"

namespace evolvex {

inline constexpr double kEdgeThreshold = 0.5;

struct PredictorParams {
  Mat w_hidden;   // d_h x d_f
  Vec b_hidden;
  Mat w_out;      // d_y x d_h
  Vec b_out;
  Vec w_link;     // 2 d_y
  Vec b_link;     // size 1
  Mat w_activity; // K x d_y
  Vec b_activity;

  int input_dim() const { return static_cast<int>(w_hidden.cols()); }
  int out_dim() const { return static_cast<int>(w_out.rows()); }
  int categories() const { return static_cast<int>(w_activity.rows()); }
};

struct PredictorCache {
  Vec input;
  Vec hidden;  // tanh activations
};

double sigmoid(double x);

// y = W_out tanh(W_h f + b_h) + b_out.
Vec predictor_forward(const Vec& f, const PredictorParams& params, PredictorCache* cache = nullptr);
// Accumulates parameter gradients into `grads` and returns dL/df.
Vec predictor_backward(const PredictorCache& cache, const PredictorParams& params, const Vec& grad_y,
                       PredictorParams& grads);

double link_logit(const Vec& y_a, const Vec& y_b, const PredictorParams& params);
// sigmoid(w_link . [y_a ; y_b] + b_link), order as given.
double link_probability(const Vec& y_a, const Vec& y_b, const PredictorParams& params);
// Undirected pairs are put in (min, max) order first so p(i, j) == p(j, i).
double pair_probability(const Mat& ys, int i, int j, const PredictorParams& params, bool directed);
// N x N probabilities with a zero diagonal.
Mat edge_probability_matrix(const Mat& ys, const PredictorParams& params, bool directed);

// Edge iff p > theta.
bool classify_edge(double p, double theta = kEdgeThreshold);
Adjacency classify_edges(const Mat& edge_probs, bool directed, double theta = kEdgeThreshold);

// Independent sigmoids over the K category logits (not a simplex).
Vec activity_probabilities(const Vec& y, const PredictorParams& params);

struct RankedList {
  int user = 0;
  std::vector<int> ids;
  std::vector<double> probs;
  // Candidates before truncation to k.
  int candidate_count = 0;
};

// Candidates sorted by probability descending, ties by ascending id. With
// exclude_existing, current neighbours of `user` in `existing` are dropped.
RankedList rank_candidates(int user, const Mat& edge_probs, const Adjacency& existing, int k = 10,
                           bool exclude_existing = true);

struct StageForecast {
  int stage = 0;
  Mat edge_probs;
  Adjacency predicted_edges;
  Mat activity_probs;  // N x K
};

struct EvolutionForecast {
  std::vector<StageForecast> stages;
};

// Probabilities are rounded to 6 decimals in the file only.
nlohmann::json forecast_to_json(const EvolutionForecast& forecast);

}  // namespace evolvex
