#pragma once

// Link and activity evaluation metrics. All functions are pure.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evolvex/predict.hpp"
#include "evolvex/types.hpp"

namespace evolvex {

// Probabilities divided by their sum; the uniform distribution if the sum is 0.
Vec renormalize(const Vec& probs);
// Argmax of the counts with ties to the lowest index; -1 when all are zero.
int dominant_category(const Vec& counts);

// exp(mean_k -log q_k(actual_k)) with each q renormalised and clamped at 1e-12.
double perplexity(const std::vector<Vec>& predicted, const std::vector<int>& actual);

// Probability that a random positive outranks a random negative, ties 0.5.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction of truth edges (i, j) with j in i's list (or, undirected, i in j's).
// `lists` are indexed by user id. Throws std::invalid_argument without truth.
double hits_at_10(const std::vector<RankedList>& lists, const std::vector<std::pair<int, int>>& truth, bool directed);
// Mean over users with at least one truth edge of hits / min(10, candidates).
double precision_at_10(const std::vector<RankedList>& lists, const std::vector<std::pair<int, int>>& truth,
                       bool directed);

// Per-category confusion counts pooled over rows.
struct CategoryCounts {
  std::vector<long> tp;
  std::vector<long> fp;
  std::vector<long> fn;
};

CategoryCounts category_confusion(const Mat& predicted_probs, const Mat& true_counts);
void accumulate(CategoryCounts& into, const CategoryCounts& more);
// Unweighted mean of per-category F1; a category empty on both sides scores 1.
double macro_f1(const CategoryCounts& counts);
double macro_f1(const Mat& predicted_probs, const Mat& true_counts);

// Fraction of pairs where classify_edge(prob) equals the label.
double accuracy(const std::vector<double>& probs, const std::vector<int>& labels);

struct StageMetrics {
  int stage = 0;
  double perplexity = 0.0;
  std::optional<double> precision_at_10;
  std::optional<double> hits_at_10;
  std::optional<double> auc_roc;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::string strategy;
  double perplexity = 0.0;
  std::optional<double> pseudo_perplexity;
  std::optional<double> precision_at_10;
  std::optional<double> hits_at_10;
  std::optional<double> auc_roc;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::optional<int> parse_failures;
  std::vector<StageMetrics> stages;
};

nlohmann::json report_to_json(const EvalReport& report);
// Fixed-order plain-text table.
std::string report_table(const EvalReport& report);

}  // namespace evolvex
