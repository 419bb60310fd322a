#include "evolvex/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include <fmt/core.h>

#include "evolvex/rng.hpp"

namespace evolvex {

using nlohmann::json;

std::string_view to_string(ActivityObjective objective) {
  return objective == ActivityObjective::Weighted ? "weighted" : "soft_bce";
}

ActivityObjective parse_activity_objective(std::string_view name) {
  if (name == "weighted") return ActivityObjective::Weighted;
  if (name == "soft_bce") return ActivityObjective::SoftBce;
  throw ConfigError(fmt::format("unknown activity objective '{}'", name));
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (lambda1 == 0.0 && lambda2 == 0.0) throw ConfigError("loss weights must not both be zero");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError(fmt::format("epochs must be >= 1, got {}", epochs));
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (negative_ratio < 1) throw ConfigError(fmt::format("negative ratio must be >= 1, got {}", negative_ratio));
  weights.validate();
}

json train_config_to_json(const TrainConfig& config) {
  return {{"epochs", config.epochs},
          {"learning_rate", config.learning_rate},
          {"negative_ratio", config.negative_ratio},
          {"seed", config.seed},
          {"lambda1", config.weights.lambda1},
          {"lambda2", config.weights.lambda2},
          {"activity_objective", std::string(to_string(config.weights.activity))},
          {"strategy", std::string(to_string(config.strategy))},
          {"beta1", config.beta1},
          {"beta2", config.beta2},
          {"epsilon", config.epsilon}};
}

PairList sample_link_pairs(const Adjacency& truth, int ratio, std::uint64_t seed) {
  if (ratio < 1) throw ConfigError("negative ratio must be >= 1");
  const int n = truth.size();
  PairList pairs = truth.edges();
  const std::size_t positives = pairs.size();
  const std::size_t total_pairs = truth.directed() ? static_cast<std::size_t>(n) * (n - 1)
                                                   : static_cast<std::size_t>(n) * (n - 1) / 2;
  const std::size_t available = total_pairs - positives;
  const std::size_t wanted = std::min(available, positives * static_cast<std::size_t>(ratio));
  if (wanted == 0) return pairs;

  Rng rng(seed);
  std::unordered_set<std::size_t> taken;
  if (wanted * 2 > available) {
    // Dense request: shuffle all non-edges and take a prefix.
    PairList pool;
    for (int i = 0; i < n; ++i) {
      for (int j = truth.directed() ? 0 : i + 1; j < n; ++j) {
        if (i != j && !truth.has(i, j)) pool.emplace_back(i, j);
      }
    }
    for (std::size_t k = pool.size(); k > 1; --k) {
      std::swap(pool[k - 1], pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(k) - 1))]);
    }
    pairs.insert(pairs.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(wanted));
    return pairs;
  }
  while (pairs.size() < positives + wanted) {
    int i = rng.uniform_int(0, n - 1);
    int j = rng.uniform_int(0, n - 1);
    if (i == j) continue;
    if (!truth.directed() && i > j) std::swap(i, j);
    if (truth.has(i, j)) continue;
    if (!taken.insert(static_cast<std::size_t>(i) * n + j).second) continue;
    pairs.emplace_back(i, j);
  }
  return pairs;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

}  // namespace

double link_loss(const Mat& edge_probs, const Adjacency& truth, const PairList& pairs) {
  if (pairs.empty()) throw std::invalid_argument("link loss needs at least one pair");
  double sum = 0.0;
  for (auto [i, j] : pairs) {
    const double p = clamp_prob(edge_probs(i, j));
    sum += truth.has(i, j) ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(pairs.size());
}

Vec activity_targets(const Vec& counts) {
  const double top = counts.size() ? counts.maxCoeff() : 0.0;
  if (top <= 0.0) return Vec::Zero(counts.size());
  return counts / top;
}

double activity_loss(const Mat& activity_probs, const Mat& counts) {
  double sum = 0.0;
  int users = 0;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const Vec target = activity_targets(counts.row(i).transpose());
    if (target.isZero(0.0)) continue;
    ++users;
    for (Eigen::Index c = 0; c < counts.cols(); ++c) {
      if (target(c) != 0.0) sum -= target(c) * std::log(clamp_prob(activity_probs(i, c)));
    }
  }
  return users ? sum / users : 0.0;
}

double soft_activity_loss(const Mat& activity_probs, const Mat& counts) {
  double sum = 0.0;
  int users = 0;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const Vec target = activity_targets(counts.row(i).transpose());
    if (target.isZero(0.0)) continue;
    ++users;
    for (Eigen::Index c = 0; c < counts.cols(); ++c) {
      const double p = clamp_prob(activity_probs(i, c));
      sum -= target(c) * std::log(p) + (1.0 - target(c)) * std::log(1.0 - p);
    }
  }
  return users ? sum / users : 0.0;
}

double total_loss(double link, double activity, const LossWeights& weights) {
  return weights.lambda1 * link + weights.lambda2 * activity;
}

std::vector<Transition> build_transitions(const TemporalDataset& ds, int negative_ratio, std::uint64_t seed) {
  std::vector<Transition> out;
  const int n = ds.users();
  const int k = ds.category_count();
  for (int t = 0; t + 1 < ds.steps(); ++t) {
    Transition tr;
    tr.step = t;
    tr.next = ds.snapshots[t + 1].adjacency;
    tr.next_counts.resize(n, k);
    for (int i = 0; i < n; ++i) {
      const auto counts = ds.category_counts(t + 1, i);
      for (int c = 0; c < k; ++c) tr.next_counts(i, c) = counts[c];
    }
    out.push_back(std::move(tr));
  }
  resample_pairs(out, negative_ratio, seed);
  return out;
}

void resample_pairs(std::vector<Transition>& transitions, int negative_ratio, std::uint64_t seed) {
  for (auto& tr : transitions) {
    tr.pairs = sample_link_pairs(tr.next, negative_ratio, derive_seed(seed, static_cast<std::uint64_t>(tr.step)));
  }
}

ObjectiveValue evaluate_objective(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                                  const std::vector<Transition>& transitions, const LossWeights& weights,
                                  Parameters* grads) {
  int last = -1;
  for (const auto& tr : transitions) last = std::max(last, tr.step);
  if (last < 0) throw std::invalid_argument("no transitions to train on");
  if (last >= static_cast<int>(inputs.steps.size())) throw std::invalid_argument("transition step outside inputs");

  SequenceInputs used;
  used.steps.assign(inputs.steps.begin(), inputs.steps.begin() + last + 1);
  const auto states = forward_sequence(params, strategy, used);
  const auto& pp = params.predictor;
  const auto dy = pp.out_dim();

  std::size_t pair_total = 0;
  int user_terms = 0;
  for (const auto& tr : transitions) {
    pair_total += tr.pairs.size();
    for (Eigen::Index i = 0; i < tr.next_counts.rows(); ++i) {
      if (tr.next_counts.row(i).maxCoeff() > 0.0) ++user_terms;
    }
  }
  const bool use_link = weights.lambda1 != 0.0 && pair_total > 0;
  const bool use_activity = weights.lambda2 != 0.0 && user_terms > 0;

  std::vector<Mat> grad_y;
  if (grads) grad_y.assign(states.size(), Mat::Zero(states.front().y.rows(), dy));

  double link_sum = 0.0;
  double activity_sum = 0.0;
  for (const auto& tr : transitions) {
    const Mat& ys = states[static_cast<std::size_t>(tr.step)].y;
    if (use_link) {
      const double scale = weights.lambda1 / static_cast<double>(pair_total);
      for (auto [i, j] : tr.pairs) {
        int a = i;
        int b = j;
        if (!tr.next.directed() && a > b) std::swap(a, b);
        const Vec ya = ys.row(a).transpose();
        const Vec yb = ys.row(b).transpose();
        const double p = link_probability(ya, yb, pp);
        const double label = tr.next.has(i, j) ? 1.0 : 0.0;
        link_sum += label > 0.0 ? -std::log(clamp_prob(p)) : -std::log(1.0 - clamp_prob(p));
        if (!grads || clamped(p)) continue;
        const double g = scale * (p - label);
        grads->predictor.w_link.head(dy) += g * ya;
        grads->predictor.w_link.tail(dy) += g * yb;
        grads->predictor.b_link(0) += g;
        grad_y[tr.step].row(a) += g * pp.w_link.head(dy).transpose();
        grad_y[tr.step].row(b) += g * pp.w_link.tail(dy).transpose();
      }
    }
    if (use_activity) {
      const double scale = weights.lambda2 / static_cast<double>(user_terms);
      for (Eigen::Index i = 0; i < tr.next_counts.rows(); ++i) {
        const Vec target = activity_targets(tr.next_counts.row(i).transpose());
        if (target.isZero(0.0)) continue;
        const Vec y = ys.row(i).transpose();
        const Vec probs = activity_probabilities(y, pp);
        Vec g_logit = Vec::Zero(probs.size());
        const bool soft = weights.activity == ActivityObjective::SoftBce;
        for (Eigen::Index c = 0; c < probs.size(); ++c) {
          const double p = clamp_prob(probs(c));
          if (soft) {
            activity_sum -= target(c) * std::log(p) + (1.0 - target(c)) * std::log(1.0 - p);
            if (!clamped(probs(c))) g_logit(c) = scale * (probs(c) - target(c));
          } else if (target(c) != 0.0) {
            activity_sum -= target(c) * std::log(p);
            if (!clamped(probs(c))) g_logit(c) = -scale * target(c) * (1.0 - probs(c));
          }
        }
        if (!grads) continue;
        grads->predictor.w_activity.noalias() += g_logit * y.transpose();
        grads->predictor.b_activity += g_logit;
        grad_y[tr.step].row(i) += (pp.w_activity.transpose() * g_logit).transpose();
      }
    }
  }

  ObjectiveValue value;
  value.link = use_link ? link_sum / static_cast<double>(pair_total) : 0.0;
  value.activity = use_activity ? activity_sum / user_terms : 0.0;
  value.total = total_loss(value.link, value.activity, weights);
  if (grads) backward_sequence(params, strategy, used, states, grad_y, *grads);
  return value;
}

json loss_trace_to_json(const LossTrace& trace) {
  return {{"total", trace.total}, {"link", trace.link}, {"activity", trace.activity}};
}

namespace {

struct AdamState {
  Parameters m;
  Parameters v;
  int t = 0;
};

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, Strategy strategy,
               const TrainConfig& config) {
  ++state.t;
  const double c1 = 1.0 - std::pow(config.beta1, state.t);
  const double c2 = 1.0 - std::pow(config.beta2, state.t);
  // Walk the four structures in lockstep; visit_blocks fixes the order.
  std::vector<double*> p_data;
  std::vector<const double*> g_data;
  std::vector<double*> m_data;
  std::vector<double*> v_data;
  std::vector<Eigen::Index> sizes;
  visit_blocks(params, strategy, [&](const char*, auto& b) {
    p_data.push_back(b.data());
    sizes.push_back(b.size());
  });
  visit_blocks(grads, strategy, [&](const char*, const auto& b) { g_data.push_back(b.data()); });
  visit_blocks(state.m, strategy, [&](const char*, auto& b) { m_data.push_back(b.data()); });
  visit_blocks(state.v, strategy, [&](const char*, auto& b) { v_data.push_back(b.data()); });
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (Eigen::Index e = 0; e < sizes[k]; ++e) {
      const double g = g_data[k][e];
      double& m = m_data[k][e];
      double& v = v_data[k][e];
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g * g;
      p_data[k][e] -= config.learning_rate * (m / c1) / (std::sqrt(v / c2) + config.epsilon);
    }
  }
}

}  // namespace

LossTrace fit(Model& model, const TemporalDataset& conditioning, const TrainConfig& config) {
  config.validate();
  if (conditioning.steps() < 2) throw ConfigError("training needs at least two conditioning snapshots");
  const auto inputs = encode_sequence(model, conditioning);
  auto transitions = build_transitions(conditioning, config.negative_ratio, derive_seed(config.seed, 0));

  AdamState adam{zeros_like(model.params), zeros_like(model.params), 0};
  LossTrace trace;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    resample_pairs(transitions, config.negative_ratio, derive_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    Parameters grads = zeros_like(model.params);
    const auto value = evaluate_objective(model.params, model.strategy, inputs, transitions, config.weights, &grads);
    if (!std::isfinite(value.link)) throw std::runtime_error(fmt::format("non-finite link loss at epoch {}", epoch));
    if (!std::isfinite(value.activity)) {
      throw std::runtime_error(fmt::format("non-finite activity loss at epoch {}", epoch));
    }
    trace.total.push_back(value.total);
    trace.link.push_back(value.link);
    trace.activity.push_back(value.activity);
    adam_step(model.params, grads, adam, model.strategy, config);
  }
  return trace;
}

TrainResult train(const TemporalDataset& conditioning, const ModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  ModelConfig mc = model_config;
  mc.strategy = config.strategy;
  TrainResult result{Model::init(conditioning, mc, config.seed), {}};
  result.trace = fit(result.model, conditioning, config);
  return result;
}

GradientReport gradient_check(const Parameters& params, Strategy strategy, const SequenceInputs& inputs,
                              const std::vector<Transition>& transitions, const LossWeights& weights,
                              double tolerance, double h) {
  Parameters analytic = zeros_like(params);
  evaluate_objective(params, strategy, inputs, transitions, weights, &analytic);

  std::vector<const double*> analytic_data;
  visit_blocks(analytic, strategy, [&](const char*, const auto& b) { analytic_data.push_back(b.data()); });

  Parameters probe = params;
  GradientReport report;
  std::size_t k = 0;
  visit_blocks(probe, strategy, [&](const char* name, auto& block) {
    BlockError err{name, 0.0};
    for (Eigen::Index e = 0; e < block.size(); ++e) {
      const double saved = block.data()[e];
      block.data()[e] = saved + h;
      const double up = evaluate_objective(probe, strategy, inputs, transitions, weights, nullptr).total;
      block.data()[e] = saved - h;
      const double down = evaluate_objective(probe, strategy, inputs, transitions, weights, nullptr).total;
      block.data()[e] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic_data[k][e];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
      err.max_relative_error = std::max(err.max_relative_error, rel);
    }
    report.max_relative_error = std::max(report.max_relative_error, err.max_relative_error);
    report.blocks.push_back(std::move(err));
    ++k;
  });
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace evolvex
