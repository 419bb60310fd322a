#include "evolvex/model.hpp"

#include <cmath>
#include <fstream>

#include <fmt/core.h>

#include "evolvex/json_util.hpp"
#include "evolvex/rng.hpp"

namespace evolvex {

using nlohmann::json;

namespace {

Mat uniform_matrix(int rows, int cols, double limit, Rng& rng) {
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

Mat glorot(int rows, int cols, Rng& rng) {
  return uniform_matrix(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

Vec row_vec(const Mat& m, Eigen::Index i) { return m.row(i).transpose(); }

}  // namespace

Parameters zeros_like(const Parameters& p) {
  Parameters z = p;
  auto zero = [](const char*, auto& block) { block.setZero(); };
  // Every block is zeroed, including ones inactive under the strategy.
  visit_blocks(z, Strategy::Attention, zero);
  z.fusion.w_q.setZero();
  return z;
}

Model Model::init(const TemporalDataset& conditioning, const ModelConfig& config, std::uint64_t seed) {
  if (config.hidden < 1 || config.out < 1) throw ConfigError("hidden and output widths must be >= 1");
  Model model;
  model.strategy = config.strategy;
  model.directed = conditioning.directed;
  model.encoder = Encoder::fit(conditioning, config.encoder, seed);

  Rng rng(derive_seed(seed, 0x70617261));
  const int d = config.encoder.dim;
  auto& f = model.params.fusion;
  f.strategy = config.strategy;
  f.proj_d = glorot(d, model.encoder.demographic_width(), rng);
  f.proj_p = glorot(d, model.encoder.post_width(), rng);
  f.proj_e = glorot(d, model.encoder.engagement_width(), rng);
  f.w_d = uniform_matrix(d, 1, 0.1, rng);
  f.w_p = uniform_matrix(d, 1, 0.1, rng);
  f.w_e = uniform_matrix(d, 1, 0.1, rng);
  f.w_q = glorot(d, d, rng);

  auto& p = model.params.predictor;
  const int k = model.categories();
  p.w_hidden = glorot(config.hidden, f.fused_dim(), rng);
  p.b_hidden = Vec::Zero(config.hidden);
  p.w_out = glorot(config.out, config.hidden, rng);
  p.b_out = Vec::Zero(config.out);
  p.w_link = uniform_matrix(2 * config.out, 1, std::sqrt(6.0 / (2.0 * config.out + 1.0)), rng);
  p.b_link = Vec::Zero(1);
  p.w_activity = glorot(k, config.out, rng);
  p.b_activity = Vec::Zero(k);
  return model;
}

SequenceInputs encode_sequence(const Model& model, const TemporalDataset& ds, int mask_step) {
  SequenceInputs inputs;
  for (int t = 0; t < ds.steps(); ++t) {
    auto raw = model.encoder.encode(ds.snapshots[t], ds.profiles);
    if (t == mask_step) {
      raw.posts.setZero();
      raw.engagement.setZero();
    }
    inputs.steps.push_back(std::move(raw));
  }
  return inputs;
}

StepState forward_step(const Parameters& params, Strategy strategy, const RawModalities& raw,
                       const std::vector<Vec>* previous) {
  const auto n = raw.demographic.rows();
  StepState state;
  state.y.resize(n, params.predictor.out_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    auto triple = project(row_vec(raw.demographic, i), row_vec(raw.posts, i), row_vec(raw.engagement, i),
                          params.fusion);
    triple.user = static_cast<int>(i);
    Vec prev;
    if (strategy == Strategy::CrossModal) {
      prev = previous ? (*previous)[static_cast<std::size_t>(i)] : initial_previous(triple);
    }
    FusionParams fusion = params.fusion;
    FusedEmbedding fused;
    switch (strategy) {
      case Strategy::Concat:
        fused = fuse_concat(triple);
        break;
      case Strategy::Attention:
        fused = fuse_attention(triple, params.fusion);
        break;
      case Strategy::CrossModal:
        fused = fuse_crossmodal(triple, prev, params.fusion);
        break;
    }
    PredictorCache cache;
    state.y.row(i) = predictor_forward(fused.f, params.predictor, &cache).transpose();
    state.triples.push_back(std::move(triple));
    state.previous.push_back(std::move(prev));
    state.fused.push_back(std::move(fused));
    state.caches.push_back(std::move(cache));
  }
  return state;
}

std::vector<StepState> forward_sequence(const Parameters& params, Strategy strategy, const SequenceInputs& inputs) {
  std::vector<StepState> states;
  std::vector<Vec> previous;
  for (const auto& raw : inputs.steps) {
    states.push_back(forward_step(params, strategy, raw, states.empty() ? nullptr : &previous));
    previous.clear();
    for (const auto& fused : states.back().fused) previous.push_back(fused.f);
  }
  return states;
}

void backward_sequence(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                       const std::vector<StepState>& states, const std::vector<Mat>& grad_y, Parameters& grads) {
  if (states.empty()) return;
  const auto n = static_cast<std::size_t>(states.front().y.rows());
  const int d = params.fusion.dim();
  for (std::size_t i = 0; i < n; ++i) {
    Vec carry = Vec::Zero(d);
    for (std::size_t t = states.size(); t-- > 0;) {
      const auto& state = states[t];
      const auto& raw = inputs.steps[t];
      Vec grad_f = predictor_backward(state.caches[i], params.predictor,
                                      grad_y[t].row(static_cast<Eigen::Index>(i)).transpose(), grads.predictor);
      TripleGrad tg;
      switch (strategy) {
        case Strategy::Concat:
          tg = concat_backward(state.triples[i], grad_f);
          break;
        case Strategy::Attention: {
          auto ag = attention_backward(state.triples[i], params.fusion, state.fused[i], grad_f);
          grads.fusion.w_d += ag.w_d;
          grads.fusion.w_p += ag.w_p;
          grads.fusion.w_e += ag.w_e;
          tg = std::move(ag.triple);
          break;
        }
        case Strategy::CrossModal: {
          grad_f += carry;
          auto cg = crossmodal_backward(state.triples[i], state.previous[i], params.fusion, state.fused[i], grad_f);
          grads.fusion.w_q += cg.w_q;
          tg = std::move(cg.triple);
          if (t > 0) {
            carry = cg.f_prev;
          } else {
            // f_prev at the first step is the modality mean.
            for (int m = 0; m < 3; ++m) tg[m] += cg.f_prev / 3.0;
          }
          break;
        }
      }
      const auto r = static_cast<Eigen::Index>(i);
      grads.fusion.proj_d.noalias() += tg.e_d * raw.demographic.row(r);
      grads.fusion.proj_p.noalias() += tg.e_p * raw.posts.row(r);
      grads.fusion.proj_e.noalias() += tg.e_e * raw.engagement.row(r);
    }
  }
}

json model_to_json(const Model& model) {
  json blocks = json::object();
  visit_blocks(model.params, model.strategy, [&](const char* name, const auto& block) {
    blocks[name] = matrix_json(Mat(block));
  });
  const auto& f = model.params.fusion;
  const auto& p = model.params.predictor;
  return {{"strategy", std::string(to_string(model.strategy))},
          {"directed", model.directed},
          {"dims",
           {{"d", f.dim()},
            {"fused", f.fused_dim()},
            {"hidden", p.w_hidden.rows()},
            {"out", p.out_dim()},
            {"categories", p.categories()},
            {"raw_demographic", f.proj_d.cols()},
            {"raw_posts", f.proj_p.cols()},
            {"raw_engagement", f.proj_e.cols()}}},
          {"encoder", encoder_to_json(model.encoder)},
          {"parameters", std::move(blocks)}};
}

Model model_from_json(const json& doc) {
  Model model;
  model.strategy = parse_strategy(doc.at("strategy").get<std::string>());
  model.directed = doc.at("directed").get<bool>();
  model.encoder = encoder_from_json(doc.at("encoder"));
  const auto& dims = doc.at("dims");
  const int d = dims.at("d").get<int>();
  model.params.fusion.strategy = model.strategy;
  // Inactive blocks keep well-formed shapes so every strategy can be loaded.
  model.params.fusion.w_d = model.params.fusion.w_p = model.params.fusion.w_e = Vec::Zero(d);
  model.params.fusion.w_q = Mat::Zero(d, d);
  const auto& blocks = doc.at("parameters");
  visit_blocks(model.params, model.strategy, [&](const char* name, auto& block) {
    const Mat m = matrix_from(blocks.at(name));
    using Block = std::decay_t<decltype(block)>;
    if constexpr (Block::ColsAtCompileTime == 1) {
      if (m.cols() != 1) throw std::runtime_error(fmt::format("parameter block {} must be a column", name));
      block = m.col(0);
    } else {
      block = m;
    }
  });
  if (model.params.fusion.dim() != d || model.params.fusion.fused_dim() != model.params.predictor.input_dim()) {
    throw std::runtime_error("checkpoint parameter shapes do not chain");
  }
  return model;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json doc = model_to_json(checkpoint.model);
  doc["schema_version"] = kCheckpointSchemaVersion;
  doc["train_config"] = checkpoint.train_config;
  doc["final_metrics"] = checkpoint.final_metrics;
  write_json_file(doc, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const json doc = read_json_file(path);
  const int version = doc.at("schema_version").get<int>();
  if (version != kCheckpointSchemaVersion) {
    throw std::runtime_error(fmt::format("checkpoint {} has schema_version {}, expected {}", path, version,
                                         kCheckpointSchemaVersion));
  }
  return {model_from_json(doc), doc.value("train_config", json::object()), doc.value("final_metrics", json::object())};
}

EvolutionForecast rollout(const TemporalDataset& conditioning, const Model& model, int horizon) {
  if (horizon < 1 || horizon > 4) throw ConfigError(fmt::format("horizon must lie in [1, 4], got {}", horizon));
  if (conditioning.steps() < 1) throw ConfigError("rollout needs at least one conditioning snapshot");
  const int n = conditioning.users();
  const int k = model.categories();
  const int dim = model.encoder.config.dim;
  const bool stop = model.encoder.config.remove_stop_words;

  // Per-user history used to turn predicted probabilities into pseudo-counts.
  std::vector<double> mean_volume(n, 0.0);
  std::vector<std::array<double, 3>> per_post(n, {0.0, 0.0, 0.0});
  Mat prototypes = Mat::Zero(k, dim);
  std::vector<double> proto_count(k, 0.0);
  for (const auto& snap : conditioning.snapshots) {
    for (int i = 0; i < n; ++i) {
      mean_volume[i] += static_cast<double>(snap.posts[i].size());
      for (const auto& c : snap.engagement[i].per_category) {
        per_post[i][0] += static_cast<double>(c.reactions);
        per_post[i][1] += static_cast<double>(c.comments);
        per_post[i][2] += static_cast<double>(c.shares);
      }
      for (const auto& post : snap.posts[i]) {
        prototypes.row(post.category) += hashed_token_counts(std::span(&post, 1), dim, stop).transpose();
        proto_count[post.category] += 1.0;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (auto& v : per_post[i]) v = mean_volume[i] > 0.0 ? v / mean_volume[i] : 0.0;
    mean_volume[i] /= static_cast<double>(conditioning.steps());
  }
  for (int c = 0; c < k; ++c) {
    if (proto_count[c] > 0.0) prototypes.row(c) /= proto_count[c];
  }

  const auto inputs = encode_sequence(model, conditioning);
  auto states = forward_sequence(model.params, model.strategy, inputs);
  StepState current = std::move(states.back());

  EvolutionForecast forecast;
  for (int s = 1; s <= horizon; ++s) {
    StageForecast stage;
    stage.stage = s;
    stage.edge_probs = edge_probability_matrix(current.y, model.params.predictor, model.directed);
    stage.predicted_edges = classify_edges(stage.edge_probs, model.directed);
    stage.activity_probs.resize(n, k);
    for (int i = 0; i < n; ++i) {
      stage.activity_probs.row(i) =
          activity_probabilities(current.y.row(i).transpose(), model.params.predictor).transpose();
    }
    forecast.stages.push_back(stage);
    if (s == horizon) break;

    RawModalities raw;
    raw.demographic = model.encoder.demographic_block(stage.predicted_edges, conditioning.profiles);
    raw.posts.resize(n, dim);
    std::vector<EngagementRecord> engagement(n);
    for (int i = 0; i < n; ++i) {
      Vec share = stage.activity_probs.row(i).transpose();
      const double total = share.sum();
      share = total > 0.0 ? Vec(share / total) : Vec(Vec::Constant(k, 1.0 / k));
      const Vec counts = share * mean_volume[i];
      Vec text = prototypes.transpose() * counts;
      if (text.norm() > 0.0) text.normalize();
      raw.posts.row(i) = text.transpose();
      engagement[i].per_category.resize(k);
      for (int c = 0; c < k; ++c) {
        engagement[i].per_category[c] = {std::lround(counts(c) * per_post[i][0]),
                                         std::lround(counts(c) * per_post[i][1]),
                                         std::lround(counts(c) * per_post[i][2])};
      }
    }
    raw.engagement = model.encoder.engagement_block(engagement);

    std::vector<Vec> previous;
    for (const auto& fused : current.fused) previous.push_back(fused.f);
    current = forward_step(model.params, model.strategy, raw, &previous);
  }
  return forecast;
}

}  // namespace evolvex
