#pragma once

#include <cstdint>

#include "evolvex/graphgen.hpp"
#include "evolvex/model.hpp"
#include "evolvex/rng.hpp"

namespace evolvex::testing {

inline GeneratorConfig tiny_config(int users = 8, int steps = 5) {
  GeneratorConfig c;
  c.users = users;
  c.steps = steps;
  c.base_edge_rate = 0.05;
  c.min_posts = 3;
  c.max_posts = 6;
  return c;
}

inline TemporalDataset tiny_dataset(std::uint64_t seed, int users = 8, int steps = 5) {
  return generate(tiny_config(users, steps), seed);
}

inline ModelConfig tiny_model_config(Strategy strategy) {
  ModelConfig mc;
  mc.strategy = strategy;
  mc.encoder.dim = 4;
  mc.hidden = 5;
  mc.out = 3;
  return mc;
}

inline Vec random_vec(Rng& rng, int n, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

inline Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  }
  return m;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline constexpr Strategy kStrategies[3] = {Strategy::Concat, Strategy::Attention, Strategy::CrossModal};

}  // namespace evolvex::testing
