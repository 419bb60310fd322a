#include "evolvex/evaluate.hpp"

#include <cmath>
#include <set>

#include <fmt/core.h>

#include "evolvex/rng.hpp"
#include "evolvex/train.hpp"

namespace evolvex {

int target_step(const TemporalDataset& full, int stage) {
  if (full.holdout < 1) throw ConfigError("dataset has no held-out snapshots");
  if (stage < 1 || stage > full.holdout) {
    throw ConfigError(fmt::format("stage must lie in [1, {}], got {}", full.holdout, stage));
  }
  return full.steps() - full.holdout + stage - 1;
}

namespace {

Mat counts_matrix(const TemporalDataset& ds, int step) {
  Mat m(ds.users(), ds.category_count());
  for (int i = 0; i < ds.users(); ++i) {
    const auto counts = ds.category_counts(step, i);
    for (int c = 0; c < ds.category_count(); ++c) m(i, c) = counts[c];
  }
  return m;
}

std::size_t users_with_truth(const std::vector<std::pair<int, int>>& truth, bool directed) {
  std::set<int> users;
  for (auto [i, j] : truth) {
    users.insert(i);
    if (!directed) users.insert(j);
  }
  return users.size();
}

// Forecast activity and dominant labels for users active at `step`.
void collect_activity(const Mat& predicted, const Mat& counts, std::vector<Vec>& dists, std::vector<int>& labels) {
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const int label = dominant_category(counts.row(i).transpose());
    if (label < 0) continue;
    dists.push_back(predicted.row(i).transpose());
    labels.push_back(label);
  }
}

}  // namespace

EvalReport score_stages(const TemporalDataset& full, const std::vector<StagePrediction>& predictions,
                        std::uint64_t seed, int negative_ratio) {
  EvalReport report;
  const int n = full.users();
  const bool directed = full.directed;

  std::vector<double> all_scores;
  std::vector<int> all_labels;
  std::vector<double> acc_probs;
  std::vector<int> acc_labels;
  std::vector<Vec> all_dists;
  std::vector<int> all_dominant;
  CategoryCounts confusion;
  double hit_total = 0.0;
  std::size_t truth_total = 0;
  double precision_sum = 0.0;
  std::size_t precision_users = 0;

  for (const auto& pred : predictions) {
    const int t = target_step(full, pred.stage);
    const Adjacency& now = full.snapshots[t].adjacency;
    const Adjacency& before = full.snapshots[t - 1].adjacency;
    StageMetrics stage;
    stage.stage = pred.stage;

    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      for (int j = directed ? 0 : i + 1; j < n; ++j) {
        if (i == j) continue;
        scores.push_back(pred.edge_scores(i, j));
        labels.push_back(now.has(i, j) ? 1 : 0);
      }
    }
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives > 0 && positives < static_cast<long>(labels.size())) stage.auc_roc = auc_roc(scores, labels);
    all_scores.insert(all_scores.end(), scores.begin(), scores.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());

    std::vector<std::pair<int, int>> fresh;
    for (auto e : now.edges()) {
      if (!before.has(e.first, e.second)) fresh.push_back(e);
    }
    if (!fresh.empty()) {
      std::vector<RankedList> lists;
      for (int u = 0; u < n; ++u) lists.push_back(rank_candidates(u, pred.edge_scores, before, 10, true));
      stage.hits_at_10 = hits_at_10(lists, fresh, directed);
      stage.precision_at_10 = precision_at_10(lists, fresh, directed);
      hit_total += *stage.hits_at_10 * static_cast<double>(fresh.size());
      truth_total += fresh.size();
      const auto users = users_with_truth(fresh, directed);
      precision_sum += *stage.precision_at_10 * static_cast<double>(users);
      precision_users += users;
    }

    std::vector<double> probs;
    std::vector<int> pair_labels;
    for (auto [i, j] : sample_link_pairs(now, negative_ratio, derive_seed(seed, static_cast<std::uint64_t>(t)))) {
      probs.push_back(pred.edge_scores(i, j));
      pair_labels.push_back(now.has(i, j) ? 1 : 0);
    }
    if (!probs.empty()) stage.accuracy = accuracy(probs, pair_labels);
    acc_probs.insert(acc_probs.end(), probs.begin(), probs.end());
    acc_labels.insert(acc_labels.end(), pair_labels.begin(), pair_labels.end());

    const Mat counts = counts_matrix(full, t);
    std::vector<Vec> dists;
    std::vector<int> dominant;
    collect_activity(pred.activity, counts, dists, dominant);
    if (!dists.empty()) stage.perplexity = perplexity(dists, dominant);
    all_dists.insert(all_dists.end(), dists.begin(), dists.end());
    all_dominant.insert(all_dominant.end(), dominant.begin(), dominant.end());
    const auto stage_confusion = category_confusion(pred.activity, counts);
    stage.macro_f1 = macro_f1(stage_confusion);
    accumulate(confusion, stage_confusion);

    report.stages.push_back(stage);
  }

  const auto positives = std::count(all_labels.begin(), all_labels.end(), 1);
  if (positives > 0 && positives < static_cast<long>(all_labels.size())) report.auc_roc = auc_roc(all_scores, all_labels);
  if (truth_total > 0) {
    report.hits_at_10 = hit_total / static_cast<double>(truth_total);
    report.precision_at_10 = precision_sum / static_cast<double>(precision_users);
  }
  if (!acc_probs.empty()) report.accuracy = accuracy(acc_probs, acc_labels);
  if (!all_dists.empty()) report.perplexity = perplexity(all_dists, all_dominant);
  if (!confusion.tp.empty()) report.macro_f1 = macro_f1(confusion);
  return report;
}

namespace {

Mat activity_matrix(const Mat& ys, const PredictorParams& params) {
  Mat out(ys.rows(), params.categories());
  for (Eigen::Index i = 0; i < ys.rows(); ++i) {
    out.row(i) = activity_probabilities(ys.row(i).transpose(), params).transpose();
  }
  return out;
}

}  // namespace

std::vector<StagePrediction> teacher_forced_predictions(const Model& model, const TemporalDataset& full) {
  const auto inputs = encode_sequence(model, full);
  const auto states = forward_sequence(model.params, model.strategy, inputs);
  std::vector<StagePrediction> out;
  for (int s = 1; s <= full.holdout; ++s) {
    const auto& y = states[static_cast<std::size_t>(target_step(full, s) - 1)].y;
    out.push_back({s, edge_probability_matrix(y, model.params.predictor, model.directed),
                   activity_matrix(y, model.params.predictor)});
  }
  return out;
}

double pseudo_perplexity(const Model& model, const TemporalDataset& ds, int first, int last) {
  if (ds.steps() < 3) throw ConfigError(fmt::format("pseudo-perplexity needs at least 3 snapshots, got {}", ds.steps()));
  first = std::max(first, 1);
  last = std::min(last, ds.steps() - 2);
  if (first > last) throw ConfigError("no interior snapshots in the requested range");

  const auto& pp = model.params.predictor;
  const auto clean = forward_sequence(model.params, model.strategy, encode_sequence(model, ds));
  std::vector<Vec> dists;
  std::vector<int> labels;
  for (int t = first; t <= last; ++t) {
    const auto masked = forward_sequence(model.params, model.strategy, encode_sequence(model, ds, t));
    const Mat before = activity_matrix(clean[static_cast<std::size_t>(t - 1)].y, pp);
    const Mat after = activity_matrix(masked[static_cast<std::size_t>(t + 1)].y, pp);
    Mat blended(before.rows(), before.cols());
    for (Eigen::Index i = 0; i < before.rows(); ++i) {
      blended.row(i) = (0.5 * (renormalize(before.row(i).transpose()) + renormalize(after.row(i).transpose())))
                           .transpose();
    }
    collect_activity(blended, counts_matrix(ds, t), dists, labels);
  }
  if (dists.empty()) throw std::invalid_argument("no active users at the interior snapshots");
  return perplexity(dists, labels);
}

double pseudo_perplexity(const Model& model, const TemporalDataset& ds) {
  return pseudo_perplexity(model, ds, 1, ds.steps() - 2);
}

EvalReport evaluate_model(const Model& model, const TemporalDataset& full, std::uint64_t seed, int negative_ratio) {
  auto report = score_stages(full, teacher_forced_predictions(model, full), seed, negative_ratio);
  report.strategy = std::string(to_string(model.strategy));
  const int first = full.steps() - full.holdout;
  if (full.steps() >= 3 && first <= full.steps() - 2) {
    report.pseudo_perplexity = pseudo_perplexity(model, full, first, full.steps() - 2);
  }
  return report;
}

}  // namespace evolvex
