#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "evolvex/evaluate.hpp"
#include "evolvex/json_util.hpp"
#include "evolvex/train.hpp"
#include "support.hpp"

using namespace evolvex;
using evolvex::testing::kStrategies;
using evolvex::testing::tiny_dataset;
using evolvex::testing::tiny_model_config;

namespace {

Model trained(std::uint64_t seed, Strategy s, const TemporalDataset& cond) {
  TrainConfig c;
  c.epochs = 10;
  c.seed = seed;
  c.strategy = s;
  return train(cond, tiny_model_config(s), c).model;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesModel) {
  for (auto s : kStrategies) {
    const auto ds = tiny_dataset(1);
    const auto model = trained(1, s, ds);
    const auto path = temp_path("evolvex_ck_" + std::string(to_string(s)) + ".json");
    save_checkpoint({model, {{"epochs", 10}}, {{"total", 1.0}}}, path);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(model_to_json(back.model).dump(), model_to_json(model).dump());
    EXPECT_EQ(back.train_config["epochs"], 10);
    EXPECT_EQ(forecast_to_json(rollout(ds, back.model, 2)), forecast_to_json(rollout(ds, model, 2)));
    std::remove(path.c_str());
  }
}

TEST(Checkpoint, RejectsOtherSchemaVersion) {
  const auto ds = tiny_dataset(2);
  const auto path = temp_path("evolvex_ck_version.json");
  save_checkpoint({trained(2, Strategy::Concat, ds), {}, {}}, path);
  auto doc = read_json_file(path);
  doc["schema_version"] = kCheckpointSchemaVersion + 1;
  write_json_file(doc, path);
  EXPECT_ANY_THROW(load_checkpoint(path));
  std::remove(path.c_str());
}

TEST(Rollout, HorizonOneIsSingleStepPrediction) {
  const auto ds = tiny_dataset(3);
  const auto model = trained(3, Strategy::CrossModal, ds);
  const auto f = rollout(ds, model, 1);
  ASSERT_EQ(f.stages.size(), 1u);
  const auto states = forward_sequence(model.params, model.strategy, encode_sequence(model, ds));
  const Mat& y = states.back().y;
  EXPECT_EQ(f.stages[0].edge_probs, edge_probability_matrix(y, model.params.predictor, false));
  for (int i = 0; i < ds.users(); ++i) {
    EXPECT_EQ(Vec(f.stages[0].activity_probs.row(i).transpose()),
              activity_probabilities(y.row(i).transpose(), model.params.predictor));
  }
  EXPECT_EQ(rollout(ds, model, 4).stages.size(), 4u);
  EXPECT_THROW(rollout(ds, model, 0), ConfigError);
  EXPECT_THROW(rollout(ds, model, 5), ConfigError);
}

// Property test over seeds and strategies: bounds, threshold agreement,
// symmetry, prefix consistency and determinism.
TEST(Rollout, ContractsHoldAcrossSeeds) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    for (auto s : kStrategies) {
      const auto ds = tiny_dataset(seed, 7, 5);
      const auto model = trained(seed, s, ds);
      const auto full = rollout(ds, model, 4);
      ASSERT_EQ(full.stages.size(), 4u);
      for (const auto& st : full.stages) {
        EXPECT_GE(st.edge_probs.minCoeff(), 0.0);
        EXPECT_LE(st.edge_probs.maxCoeff(), 1.0);
        EXPECT_GE(st.activity_probs.minCoeff(), 0.0);
        EXPECT_LE(st.activity_probs.maxCoeff(), 1.0);
        EXPECT_TRUE(st.edge_probs.isApprox(st.edge_probs.transpose(), 0.0));
        EXPECT_EQ(st.predicted_edges, classify_edges(st.edge_probs, false));
      }
      for (int h = 1; h < 4; ++h) {
        const auto shorter = rollout(ds, model, h);
        for (int k = 0; k < h; ++k) {
          EXPECT_EQ(shorter.stages[k].edge_probs, full.stages[k].edge_probs);
          EXPECT_EQ(shorter.stages[k].activity_probs, full.stages[k].activity_probs);
        }
      }
      EXPECT_EQ(forecast_to_json(rollout(ds, model, 4)).dump(), forecast_to_json(full).dump());
    }
  }
}

TEST(Rollout, StagesDifferOnceFeedbackKicksIn) {
  const auto ds = tiny_dataset(20);
  const auto model = trained(20, Strategy::CrossModal, ds);
  const auto f = rollout(ds, model, 4);
  EXPECT_NE(f.stages[0].activity_probs, f.stages[1].activity_probs);
}

TEST(Forecast, JsonHasOneEntryPerStage) {
  const auto ds = tiny_dataset(4);
  const auto doc = forecast_to_json(rollout(ds, trained(4, Strategy::Attention, ds), 4));
  ASSERT_EQ(doc["stages"].size(), 4u);
  EXPECT_EQ(doc["stages"][3]["stage"], 4);
  EXPECT_EQ(doc["stages"][0]["activities"].size(), static_cast<std::size_t>(ds.users()));
}

TEST(Evaluate, TargetStepArithmetic) {
  const auto full = mark_holdout(generate(GeneratorConfig{}, 1), 4);
  EXPECT_EQ(target_step(full, 1), 4);
  EXPECT_EQ(target_step(full, 4), 7);
  EXPECT_THROW(target_step(full, 5), ConfigError);
  EXPECT_THROW(target_step(conditioning_part(full), 1), ConfigError);
}

TEST(Evaluate, OraclePredictionsScorePerfectly) {
  const auto full = mark_holdout(generate(GeneratorConfig{}, 2), 4);
  std::vector<StagePrediction> preds;
  for (int s = 1; s <= 4; ++s) {
    const int t = target_step(full, s);
    Mat activity = Mat::Zero(full.users(), full.category_count());
    for (int i = 0; i < full.users(); ++i) {
      const auto counts = full.category_counts(t, i);
      for (int c = 0; c < full.category_count(); ++c) activity(i, c) = counts[c] > 0 ? 1.0 : 0.0;
    }
    preds.push_back({s, full.snapshots[t].adjacency.to_matrix(), activity});
  }
  const auto report = score_stages(full, preds, 0);
  EXPECT_EQ(*report.auc_roc, 1.0);
  EXPECT_EQ(report.accuracy, 1.0);
  EXPECT_EQ(report.macro_f1, 1.0);
  ASSERT_TRUE(report.hits_at_10.has_value());
  EXPECT_EQ(*report.hits_at_10, 1.0);
  EXPECT_EQ(report.stages.size(), 4u);
}

TEST(Evaluate, UniformActivityHasPerplexityEight) {
  const auto full = mark_holdout(generate(GeneratorConfig{}, 3), 4);
  std::vector<StagePrediction> preds;
  for (int s = 1; s <= 4; ++s) {
    preds.push_back({s, Mat::Constant(full.users(), full.users(), 0.3),
                     Mat::Constant(full.users(), full.category_count(), 0.5)});
  }
  EXPECT_NEAR(score_stages(full, preds, 0).perplexity, 8.0, 1e-12);
}

TEST(PseudoPerplexity, NeedsThreeSnapshots) {
  auto ds = tiny_dataset(5);
  const auto model = trained(5, Strategy::Concat, ds);
  ds.snapshots.resize(2);
  EXPECT_THROW(pseudo_perplexity(model, ds), ConfigError);
}

// With post and engagement projections zeroed, masking step 1 changes
// nothing; identical graphs at steps 0 and 2 then make the backward-looking
// half equal the forward one, so both scores coincide.
TEST(PseudoPerplexity, CoincidesWithPerplexityOnConstructedInstance) {
  auto ds = tiny_dataset(6);
  ds.snapshots.resize(3);
  ds.snapshots[2].adjacency = ds.snapshots[0].adjacency;
  auto model = trained(6, Strategy::Concat, ds);
  model.params.fusion.proj_p.setZero();
  model.params.fusion.proj_e.setZero();
  const auto states = forward_sequence(model.params, model.strategy, encode_sequence(model, ds));
  std::vector<Vec> dists;
  std::vector<int> labels;
  for (int i = 0; i < ds.users(); ++i) {
    const auto counts = ds.category_counts(1, i);
    const int label = dominant_category(Eigen::Map<const Vec>(counts.data(), counts.size()));
    if (label < 0) continue;
    dists.push_back(activity_probabilities(states[0].y.row(i).transpose(), model.params.predictor));
    labels.push_back(label);
  }
  EXPECT_NEAR(pseudo_perplexity(model, ds), perplexity(dists, labels), 1e-12);
}

TEST(Evaluate, ModelReportIsPopulated) {
  const auto full = mark_holdout(generate(GeneratorConfig{}, 7), 4);
  const auto model = trained(7, Strategy::CrossModal, conditioning_part(full));
  const auto report = evaluate_model(model, full, 7);
  EXPECT_EQ(report.strategy, "crossmodal");
  EXPECT_TRUE(report.pseudo_perplexity.has_value());
  EXPECT_TRUE(report.auc_roc.has_value());
  EXPECT_GE(report.perplexity, 1.0);
  EXPECT_LE(report.perplexity, 1e12);
  EXPECT_EQ(report_to_json(report).dump(), report_to_json(evaluate_model(model, full, 7)).dump());
}
