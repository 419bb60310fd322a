#pragma once

// The full forecasting model: frozen encoders, learned projections/fusion,
// predictor and heads. Forward and backward passes run over a user's whole
// step sequence so the cross-modal query can be differentiated through time.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolvex/embed.hpp"
#include "evolvex/fusion.hpp"
#include "evolvex/graphgen.hpp"
#include "evolvex/predict.hpp"

namespace evolvex {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Parameters {
  FusionParams fusion;
  PredictorParams predictor;
};

Parameters zeros_like(const Parameters& p);

// Calls fn(name, block) for every learned block that is active under the
// strategy; block is a Mat& or Vec& (const when `p` is const).
template <class P, class Fn>
void visit_blocks(P& p, Strategy strategy, Fn&& fn) {
  fn("proj_d", p.fusion.proj_d);
  fn("proj_p", p.fusion.proj_p);
  fn("proj_e", p.fusion.proj_e);
  if (strategy == Strategy::Attention) {
    fn("w_d", p.fusion.w_d);
    fn("w_p", p.fusion.w_p);
    fn("w_e", p.fusion.w_e);
  }
  if (strategy == Strategy::CrossModal) fn("w_q", p.fusion.w_q);
  fn("w_hidden", p.predictor.w_hidden);
  fn("b_hidden", p.predictor.b_hidden);
  fn("w_out", p.predictor.w_out);
  fn("b_out", p.predictor.b_out);
  fn("w_link", p.predictor.w_link);
  fn("b_link", p.predictor.b_link);
  fn("w_activity", p.predictor.w_activity);
  fn("b_activity", p.predictor.b_activity);
}

struct ModelConfig {
  Strategy strategy = Strategy::CrossModal;
  EncoderConfig encoder;
  int hidden = 32;
  int out = 32;
};

struct Model {
  Strategy strategy = Strategy::CrossModal;
  bool directed = false;
  Encoder encoder;
  Parameters params;

  int categories() const { return static_cast<int>(encoder.categories.size()); }

  static Model init(const TemporalDataset& conditioning, const ModelConfig& config, std::uint64_t seed);
};

struct SequenceInputs {
  std::vector<RawModalities> steps;
};

// Encodes every snapshot. When mask_step is a valid index, that step's post
// and engagement inputs are zeroed.
SequenceInputs encode_sequence(const Model& model, const TemporalDataset& ds, int mask_step = -1);

struct StepState {
  std::vector<ModalityTriple> triples;
  std::vector<Vec> previous;  // f_prev used per user (cross-modal only)
  std::vector<FusedEmbedding> fused;
  std::vector<PredictorCache> caches;
  Mat y;  // N x d_y
};

// One step for all users; `previous` may be null at the first step.
StepState forward_step(const Parameters& params, Strategy strategy, const RawModalities& raw,
                       const std::vector<Vec>* previous);
std::vector<StepState> forward_sequence(const Parameters& params, Strategy strategy, const SequenceInputs& inputs);
// grad_y[t] is N x d_y; parameter gradients are accumulated into `grads`.
void backward_sequence(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                       const std::vector<StepState>& states, const std::vector<Mat>& grad_y, Parameters& grads);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

struct Checkpoint {
  Model model;
  nlohmann::json train_config;
  nlohmann::json final_metrics;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Autoregressive forecast of the stages following the last conditioning
// snapshot. Stage s > 1 feeds back stage s-1's fused state, predicted
// adjacency and expected activity counts.
EvolutionForecast rollout(const TemporalDataset& conditioning, const Model& model, int horizon = 4);

}  // namespace evolvex
