#include "evolvex/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/core.h>

namespace evolvex {

using nlohmann::json;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec predictor_forward(const Vec& f, const PredictorParams& params, PredictorCache* cache) {
  if (f.size() != params.w_hidden.cols()) {
    throw std::invalid_argument(
        fmt::format("fused dimension {} does not match predictor input {}", f.size(), params.w_hidden.cols()));
  }
  Vec hidden = (params.w_hidden * f + params.b_hidden).array().tanh().matrix();
  Vec y = params.w_out * hidden + params.b_out;
  if (cache) {
    cache->input = f;
    cache->hidden = std::move(hidden);
  }
  return y;
}

Vec predictor_backward(const PredictorCache& cache, const PredictorParams& params, const Vec& grad_y,
                       PredictorParams& grads) {
  grads.w_out.noalias() += grad_y * cache.hidden.transpose();
  grads.b_out += grad_y;
  const Vec grad_hidden = params.w_out.transpose() * grad_y;
  const Vec grad_pre = grad_hidden.array() * (1.0 - cache.hidden.array().square());
  grads.w_hidden.noalias() += grad_pre * cache.input.transpose();
  grads.b_hidden += grad_pre;
  return params.w_hidden.transpose() * grad_pre;
}

double link_logit(const Vec& y_a, const Vec& y_b, const PredictorParams& params) {
  const auto dy = y_a.size();
  return params.w_link.head(dy).dot(y_a) + params.w_link.tail(dy).dot(y_b) + params.b_link(0);
}

double link_probability(const Vec& y_a, const Vec& y_b, const PredictorParams& params) {
  return sigmoid(link_logit(y_a, y_b, params));
}

double pair_probability(const Mat& ys, int i, int j, const PredictorParams& params, bool directed) {
  if (!directed && i > j) std::swap(i, j);
  return link_probability(ys.row(i).transpose(), ys.row(j).transpose(), params);
}

Mat edge_probability_matrix(const Mat& ys, const PredictorParams& params, bool directed) {
  const auto n = ys.rows();
  Mat probs = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) continue;
      const double p = pair_probability(ys, static_cast<int>(i), static_cast<int>(j), params, directed);
      probs(i, j) = p;
      if (!directed) probs(j, i) = p;
    }
  }
  return probs;
}

bool classify_edge(double p, double theta) { return p > theta; }

Adjacency classify_edges(const Mat& edge_probs, bool directed, double theta) {
  const int n = static_cast<int>(edge_probs.rows());
  Adjacency out(n, directed);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && classify_edge(edge_probs(i, j), theta)) out.add(i, j);
    }
  }
  return out;
}

Vec activity_probabilities(const Vec& y, const PredictorParams& params) {
  const Vec logits = params.w_activity * y + params.b_activity;
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

RankedList rank_candidates(int user, const Mat& edge_probs, const Adjacency& existing, int k,
                           bool exclude_existing) {
  const int n = static_cast<int>(edge_probs.rows());
  if (user < 0 || user >= n) throw std::out_of_range(fmt::format("unknown user id {}", user));
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<int> candidates;
  for (int j = 0; j < n; ++j) {
    if (j == user) continue;
    if (exclude_existing && existing.size() == n && existing.has(user, j)) continue;
    candidates.push_back(j);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return edge_probs(user, a) > edge_probs(user, b); });
  RankedList out;
  out.user = user;
  out.candidate_count = static_cast<int>(candidates.size());
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  for (std::size_t r = 0; r < take; ++r) {
    out.ids.push_back(candidates[r]);
    out.probs.push_back(edge_probs(user, candidates[r]));
  }
  return out;
}

json forecast_to_json(const EvolutionForecast& forecast) {
  auto round6 = [](double p) { return std::round(p * 1e6) / 1e6; };
  json stages = json::array();
  for (const auto& stage : forecast.stages) {
    json edges = json::array();
    for (auto [i, j] : stage.predicted_edges.edges()) edges.push_back({i, j, round6(stage.edge_probs(i, j))});
    json activities = json::array();
    for (Eigen::Index i = 0; i < stage.activity_probs.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index c = 0; c < stage.activity_probs.cols(); ++c) row.push_back(round6(stage.activity_probs(i, c)));
      activities.push_back(std::move(row));
    }
    stages.push_back({{"stage", stage.stage}, {"edges", std::move(edges)}, {"activities", std::move(activities)}});
  }
  return {{"stages", std::move(stages)}};
}

}  // namespace evolvex
