// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/core.h>

#include "evolvex/cli.hpp"
#include "evolvex/config.hpp"
#include "evolvex/evaluate.hpp"
#include "evolvex/metrics.hpp"
#include "evolvex/promptgen.hpp"
#include "evolvex/rng.hpp"
#include "evolvex/train.hpp"

using namespace evolvex;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr int kGradInstances = 20;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kLossTolerance = 1e-12;
constexpr int kAucInstances = 100;
constexpr int kOrderingSeeds = 5;
constexpr int kOrderingRequired = 4;
constexpr int kOrderingEpochs = 200;
constexpr double kOrderingBudgetSeconds = 300.0;
constexpr double kAucThreshold = 0.85;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int failures = 0;
  for (auto s : {Strategy::Concat, Strategy::Attention, Strategy::CrossModal}) {
    for (int k = 0; k < kGradInstances; ++k) {
      const std::uint64_t seed = 1000 + k;
      GeneratorConfig g;
      g.users = 6;
      g.steps = 5;
      g.base_edge_rate = 0.05;
      g.min_posts = 3;
      g.max_posts = 6;
      const auto ds = generate(g, seed);
      ModelConfig mc;
      mc.strategy = s;
      mc.encoder.dim = 4;
      mc.hidden = 5;
      mc.out = 3;
      const auto model = Model::init(ds, mc, seed);
      const auto report = gradient_check(model.params, s, encode_sequence(model, ds), build_transitions(ds, 1, seed),
                                         LossWeights{}, kGradTolerance, kGradStep);
      worst = std::max(worst, report.max_relative_error);
      if (!report.passed) ++failures;
    }
  }
  const double secs = seconds_since(start);
  return {failures == 0 && worst < kGradTolerance && secs < kGradBudgetSeconds,
          fmt::format("3 strategies x {} instances, max rel err {:.2e} (< {:.0e}), {:.1f}s (< {:.0f}s)", kGradInstances,
                      worst, kGradTolerance, secs, kGradBudgetSeconds)};
}

Outcome loss_oracles() {
  // 3 users, 3 categories, all three pairs scored.
  Mat p = Mat::Zero(3, 3);
  p(0, 1) = p(1, 0) = 0.8;
  p(0, 2) = p(2, 0) = 0.3;
  p(1, 2) = p(2, 1) = 0.6;
  Adjacency truth(3, false);
  truth.add(0, 1);
  truth.add(1, 2);
  const double link_expected = -(std::log(0.8) + std::log(0.7) + std::log(0.6)) / 3.0;
  const double link = link_loss(p, truth, {{0, 1}, {0, 2}, {1, 2}});

  Mat probs(3, 3);
  probs << 0.7, 0.4, 0.2,
           0.6, 0.9, 0.8,
           0.5, 0.1, 0.3;
  Mat counts(3, 3);
  counts << 4, 2, 0,
            1, 3, 3,
            0, 0, 0;  // user 2 has no activity and is skipped
  const double u0 = -(std::log(0.7) + 0.5 * std::log(0.4));
  const double u1 = -((1.0 / 3.0) * std::log(0.6) + std::log(0.9) + std::log(0.8));
  const double act_expected = (u0 + u1) / 2.0;
  const double act = activity_loss(probs, counts);

  const double s0 = -(std::log(0.7) + 0.5 * std::log(0.4) + 0.5 * std::log(0.6) + std::log(0.8));
  const double s1 = -((1.0 / 3.0) * std::log(0.6) + (2.0 / 3.0) * std::log(0.4) + std::log(0.9) + std::log(0.8));
  const double soft_expected = (s0 + s1) / 2.0;
  const double soft = soft_activity_loss(probs, counts);

  const double err = std::max({std::abs(link - link_expected), std::abs(act - act_expected),
                               std::abs(soft - soft_expected)});
  return {err <= kLossTolerance, fmt::format("link {:.15f}, activity {:.15f}, soft {:.15f}, max abs err {:.1e} (<= {:.0e})",
                                             link, act, soft, err, kLossTolerance)};
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (y[a] != 1 || y[b] != 0) continue;
      pairs += 1.0;
      wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

Outcome metric_oracles() {
  Rng rng(7);
  int mismatches = 0;
  for (int trial = 0; trial < kAucInstances; ++trial) {
    const int n = rng.uniform_int(2, 25);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int k = 0; k < n; ++k) {
      s[k] = rng.uniform_int(0, 5) / 5.0;
      y[k] = rng.uniform_int(0, 1);
    }
    y[0] = 1;
    y[1] = 0;
    if (auc_roc(s, y) != brute_auc(s, y)) ++mismatches;
  }
  const double uniform = perplexity(std::vector<Vec>(10, Vec::Constant(8, 0.125)), {0, 1, 2, 3, 4, 5, 6, 7, 0, 1});
  auto dist = [](double q) { return (Vec(2) << q, 1.0 - q).finished(); };
  const double four = perplexity({dist(0.5), dist(0.25), dist(0.125)}, {0, 0, 0});
  const bool ok = mismatches == 0 && uniform == 8.0 && std::abs(four - 4.0) < 1e-12;
  return {ok, fmt::format("AUC mismatches {}/{} (exact), uniform PPL {} (== 8 exactly), closed form {:.15f} (4.0 to 1e-12)",
                          mismatches, kAucInstances, uniform, four)};
}

struct OrderingRun {
  double ppl[3];
  double auc[3];
};

std::vector<OrderingRun> ordering_runs(double& seconds) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<OrderingRun> runs;
  for (int seed = 1; seed <= kOrderingSeeds; ++seed) {
    GeneratorConfig g;
    g.users = 24;
    g.steps = 8;
    g.drift = 0.5;
    g.homophily = 0.8;
    const auto full = mark_holdout(generate(g, seed), 4);
    const auto cond = conditioning_part(full);
    OrderingRun run{};
    int k = 0;
    for (auto s : {Strategy::Concat, Strategy::Attention, Strategy::CrossModal}) {
      ModelConfig mc;
      mc.strategy = s;
      TrainConfig tc;
      tc.strategy = s;
      tc.epochs = kOrderingEpochs;
      tc.seed = static_cast<std::uint64_t>(seed);
      tc.weights.lambda1 = 0.5;
      tc.weights.lambda2 = 0.5;
      const auto model = train(cond, mc, tc).model;
      const auto report = evaluate_model(model, full, static_cast<std::uint64_t>(seed));
      run.ppl[k] = report.perplexity;
      run.auc[k] = report.auc_roc.value_or(0.0);
      ++k;
    }
    runs.push_back(run);
  }
  seconds = seconds_since(start);
  return runs;
}

Outcome fusion_ordering(const std::vector<OrderingRun>& runs, double seconds) {
  int wins = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    if (r.ppl[2] < r.ppl[0]) ++wins;
    per_seed += fmt::format(" [seed {}: concat {:.3f} attention {:.3f} crossmodal {:.3f}]", i + 1, r.ppl[0], r.ppl[1],
                            r.ppl[2]);
  }
  return {wins >= kOrderingRequired && seconds < kOrderingBudgetSeconds,
          fmt::format("crossmodal < concat perplexity in {}/{} seeds (need >= {}), {:.1f}s (< {:.0f}s);{}", wins,
                      runs.size(), kOrderingRequired, seconds, kOrderingBudgetSeconds, per_seed)};
}

Outcome link_quality(const std::vector<OrderingRun>& runs) {
  int good = 0;
  std::string aucs;
  for (const auto& r : runs) {
    if (r.auc[2] >= kAucThreshold) ++good;
    aucs += fmt::format(" {:.3f}", r.auc[2]);
  }
  return {good >= kOrderingRequired, fmt::format("crossmodal AUC >= {} in {}/{} seeds (need >= {}); AUC:{}", kAucThreshold,
                                                 good, runs.size(), kOrderingRequired, aucs)};
}

Outcome rollout_contracts() {
  int checks = 0;
  std::string problem;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    GeneratorConfig g;
    g.users = 12;
    g.steps = 6;
    const auto ds = generate(g, seed);
    for (auto s : {Strategy::Concat, Strategy::Attention, Strategy::CrossModal}) {
      ModelConfig mc;
      mc.strategy = s;
      TrainConfig tc;
      tc.strategy = s;
      tc.epochs = 20;
      tc.seed = seed;
      const auto model = train(ds, mc, tc).model;
      const auto full = rollout(ds, model, 4);
      const auto again = rollout(ds, model, 4);
      auto fail = [&](const std::string& what) {
        if (problem.empty()) problem = fmt::format("{} (seed {}, {})", what, seed, to_string(s));
      };
      if (full.stages.size() != 4) fail("stage count");
      for (const auto& st : full.stages) {
        ++checks;
        if (st.edge_probs.minCoeff() < 0 || st.edge_probs.maxCoeff() > 1 || st.activity_probs.minCoeff() < 0 ||
            st.activity_probs.maxCoeff() > 1) {
          fail("probability bounds");
        }
        if (st.edge_probs != st.edge_probs.transpose()) fail("symmetry");
        for (int i = 0; i < ds.users(); ++i) {
          for (int j = 0; j < ds.users(); ++j) {
            if (i != j && st.predicted_edges.has(i, j) != (st.edge_probs(i, j) > 0.5)) fail("threshold");
          }
        }
      }
      for (int h = 1; h < 4; ++h) {
        const auto prefix = rollout(ds, model, h);
        for (int k = 0; k < h; ++k) {
          ++checks;
          if (prefix.stages[k].edge_probs != full.stages[k].edge_probs ||
              prefix.stages[k].activity_probs != full.stages[k].activity_probs) {
            fail("prefix consistency");
          }
        }
      }
      ++checks;
      if (forecast_to_json(full).dump() != forecast_to_json(again).dump()) fail("determinism");
    }
  }
  return {problem.empty(), problem.empty() ? fmt::format("{} checks over 4 seeds x 3 strategies, horizon 4", checks)
                                           : "violated: " + problem};
}

Outcome prompt_round_trip() {
  GeneratorConfig g;
  g.users = 12;
  const auto full = mark_holdout(generate(g, 12), 4);
  const auto report = evaluate_llm_path(full, ProviderConfig{}, 4, 12);
  const int failures = report.parse_failures.value_or(-1);
  const bool populated = report.auc_roc && report.hits_at_10 && report.precision_at_10 &&
                         std::isfinite(report.perplexity) && std::isfinite(report.accuracy) &&
                         std::isfinite(report.macro_f1) && report.stages.size() == 4;
  return {failures == 0 && populated,
          fmt::format("12 users x 4 stages, parse failures {}, report {}", failures, populated ? "complete" : "incomplete")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome end_to_end_determinism() {
  const auto root = fs::temp_directory_path() / "evolvex_acceptance";
  fs::remove_all(root);
  std::ostringstream sink;
  auto pipeline = [&](const std::string& sub) {
    const auto d = (root / sub).string();
    const auto data = d + "/dataset.json";
    int rc = cli::run({"--output-dir", d, "generate", "--users", "16", "--steps", "8", "--seed", "3"}, sink, sink);
    rc |= cli::run({"--output-dir", d, "train", "--data", data, "--epochs", "30", "--seed", "3"}, sink, sink);
    rc |= cli::run({"--output-dir", d, "eval", "--data", data, "--checkpoint", d + "/checkpoint_crossmodal.json",
                    "--seed", "3"},
                   sink, sink);
    rc |= cli::run({"--output-dir", d, "forecast", "--data", data, "--checkpoint", d + "/checkpoint_crossmodal.json"},
                   sink, sink);
    return rc;
  };
  const int rc = pipeline("a") | pipeline("b");
  int identical = 0;
  int total = 0;
  for (const char* f : {"dataset.json", "checkpoint_crossmodal.json", "loss_crossmodal.json",
                        "report_crossmodal.json", "forecast.json"}) {
    ++total;
    const auto a = root / "a" / f;
    if (fs::exists(a) && slurp(a) == slurp(root / "b" / f)) ++identical;
  }
  fs::remove_all(root);
  return {rc == 0 && identical == total,
          fmt::format("exit codes {}, {}/{} output files byte-identical across two runs", rc, identical, total)};
}

}  // namespace

int main() {
  unsetenv(kConfigEnvVar);
  int failed = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  };

  report("gradient-correctness", gradient_correctness());
  report("loss-oracle-equivalence", loss_oracles());
  report("metric-oracles", metric_oracles());
  double seconds = 0.0;
  const auto runs = ordering_runs(seconds);
  report("fusion-ordering", fusion_ordering(runs, seconds));
  report("link-prediction-quality", link_quality(runs));
  report("rollout-contracts", rollout_contracts());
  report("prompt-round-trip", prompt_round_trip());
  report("end-to-end-determinism", end_to_end_determinism());

  std::cout << (failed == 0 ? "ALL PASS" : fmt::format("{} criteria failed", failed)) << std::endl;
  return failed == 0 ? 0 : 1;
}
