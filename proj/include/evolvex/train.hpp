#pragma once

// Link and activity losses, negative sampling, the Adam training loop and
// finite-difference gradient verification.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evolvex/model.hpp"

namespace evolvex {

inline constexpr double kProbClamp = 1e-12;

// Activity term used during training. Weighted is -sum_c t_c log P_c, which
// never penalises probability mass on inactive categories; SoftBce adds the
// complement -(1 - t_c) log(1 - P_c) so P tracks the normalised counts.
enum class ActivityObjective { Weighted, SoftBce };

std::string_view to_string(ActivityObjective objective);
ActivityObjective parse_activity_objective(std::string_view name);

struct LossWeights {
  double lambda1 = 0.5;  // link
  double lambda2 = 0.5;  // activity
  ActivityObjective activity = ActivityObjective::SoftBce;

  void validate() const;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 2e-3;
  int negative_ratio = 1;
  std::uint64_t seed = 0;
  LossWeights weights;
  Strategy strategy = Strategy::CrossModal;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);

using PairList = std::vector<std::pair<int, int>>;

// Every edge of `truth` (canonical i < j when undirected) followed by
// ratio * |edges| distinct non-edges drawn with the given seed. Fewer
// negatives are returned only when the graph has fewer non-edges.
PairList sample_link_pairs(const Adjacency& truth, int ratio, std::uint64_t seed);

// Mean binary cross-entropy over `pairs` with probabilities clamped to
// [1e-12, 1 - 1e-12]. Throws std::invalid_argument on an empty pair set.
double link_loss(const Mat& edge_probs, const Adjacency& truth, const PairList& pairs);

// Targets are counts divided by the user's maximum count; loss is
// -sum_c target_c log P_c, averaged over users with any nonzero count.
double activity_loss(const Mat& activity_probs, const Mat& counts);
// Same targets and averaging with the soft binary cross-entropy term.
double soft_activity_loss(const Mat& activity_probs, const Mat& counts);
Vec activity_targets(const Vec& counts);

double total_loss(double link, double activity, const LossWeights& weights);

// One supervised transition: outputs at `step` predict the graph and
// category counts of step + 1.
struct Transition {
  int step = 0;
  Adjacency next;
  Mat next_counts;  // N x K
  PairList pairs;
};

// Transitions t -> t+1 for every consecutive pair of snapshots in `ds`.
std::vector<Transition> build_transitions(const TemporalDataset& ds, int negative_ratio, std::uint64_t seed);
void resample_pairs(std::vector<Transition>& transitions, int negative_ratio, std::uint64_t seed);

struct ObjectiveValue {
  double total = 0.0;
  double link = 0.0;
  double activity = 0.0;
};

// Link loss is the mean over all sampled pairs of all transitions; activity
// loss the mean over all included (user, transition) terms. Gradients are
// accumulated into `grads` when non-null. `inputs` must cover every step
// referenced by the transitions.
ObjectiveValue evaluate_objective(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                                  const std::vector<Transition>& transitions, const LossWeights& weights,
                                  Parameters* grads);

struct LossTrace {
  std::vector<double> total;
  std::vector<double> link;
  std::vector<double> activity;
};

nlohmann::json loss_trace_to_json(const LossTrace& trace);

struct TrainResult {
  Model model;
  LossTrace trace;
};

// Trains on consecutive-step transitions of the conditioning data. The loss
// recorded for an epoch is the one evaluated before that epoch's update.
TrainResult train(const TemporalDataset& conditioning, const ModelConfig& model_config, const TrainConfig& config);
// Continues training an initialised model in place.
LossTrace fit(Model& model, const TemporalDataset& conditioning, const TrainConfig& config);

struct BlockError {
  std::string name;
  double max_relative_error = 0.0;
};

struct GradientReport {
  std::vector<BlockError> blocks;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps entries whose
// true gradient is ~0 from dividing round-off by round-off.
inline constexpr double kRelativeErrorFloor = 1e-6;

GradientReport gradient_check(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                              const std::vector<Transition>& transitions, const LossWeights& weights,
                              double tolerance = 1e-4, double h = 1e-5);

}  // namespace evolvex
