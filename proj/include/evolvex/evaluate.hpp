#pragma once

// Held-out evaluation of a trained model and the shared scorer used for any
// per-stage prediction source (model or language-model forecasts).

#include <cstdint>
#include <vector>

#include "evolvex/metrics.hpp"
#include "evolvex/model.hpp"

namespace evolvex {

// Predictions for one held-out stage. Stage s targets snapshot
// T - holdout + s - 1 of the full dataset.
struct StagePrediction {
  int stage = 0;
  Mat edge_scores;  // N x N, higher means more likely
  Mat activity;     // N x K probabilities
};

int target_step(const TemporalDataset& full, int stage);

// Scores predictions against the held-out snapshots. New edges for ranking
// metrics are those absent from the previous snapshot; accuracy uses the
// positives plus seeded negatives of each target graph.
EvalReport score_stages(const TemporalDataset& full, const std::vector<StagePrediction>& predictions,
                        std::uint64_t seed, int negative_ratio = 1);

// One-step-ahead predictions for every held-out snapshot, each conditioned on
// the true history before it.
std::vector<StagePrediction> teacher_forced_predictions(const Model& model, const TemporalDataset& full);

// Masked-step perplexity over interior snapshots in [first, last]: the
// category distribution for step t averages the forward prediction from
// step t-1 with the prediction at step t+1 of a run where step t's posts and
// engagement are zeroed. Throws ConfigError when the dataset has T < 3.
double pseudo_perplexity(const Model& model, const TemporalDataset& ds, int first, int last);
double pseudo_perplexity(const Model& model, const TemporalDataset& ds);

// Held-out report: teacher-forced stage metrics plus pseudo-perplexity over
// the interior held-out snapshots.
EvalReport evaluate_model(const Model& model, const TemporalDataset& full, std::uint64_t seed,
                          int negative_ratio = 1);

}  // namespace evolvex
