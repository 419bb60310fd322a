#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include "evolvex/embed.hpp"
#include "evolvex/external.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace evolvex;
using evolvex::testing::random_mat;

namespace {

std::vector<DemographicProfile> profiles_with_ages(std::initializer_list<int> ages) {
  std::vector<DemographicProfile> out;
  for (int a : ages) out.push_back({a, 0, 0, 0});
  return out;
}

TemporalDataset with_profiles(std::vector<DemographicProfile> profiles) {
  TemporalDataset ds;
  ds.profiles = std::move(profiles);
  ds.vocabularies = Vocabularies::defaults();
  return ds;
}

EngagementRecord record(std::vector<EngagementCounts> counts) { return EngagementRecord{std::move(counts)}; }

// Minimal encoder endpoint on an ephemeral port.
class EncoderServer {
 public:
  explicit EncoderServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/encode", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EncoderServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/encode"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Demographics, AgeIsStandardised) {
  const auto ds = with_profiles(profiles_with_ages({20, 30, 40}));
  const auto stats = fit_demographic_stats(ds);
  const Mat x = preprocess_demographics(ds.profiles, stats, ds.vocabularies);
  EXPECT_DOUBLE_EQ(x(1, 0), 0.0);
  EXPECT_NEAR(x(0, 0), -x(2, 0), 1e-12);
}

TEST(Demographics, ZeroSpreadAgeMapsToZero) {
  const auto ds = with_profiles(profiles_with_ages({25, 25}));
  const Mat x = preprocess_demographics(ds.profiles, fit_demographic_stats(ds), ds.vocabularies);
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_EQ(x(1, 0), 0.0);
}

TEST(Demographics, LocationIsOneHot) {
  Vocabularies v{{"f"}, {"o"}, {"A", "B", "C", "D", "E"}};
  const std::vector<DemographicProfile> p = {{30, 0, 0, 2}};
  const Mat x = preprocess_demographics(p, DemographicStats{30, 0}, v);
  ASSERT_EQ(x.cols(), 1 + 1 + 1 + 5);
  for (int l = 0; l < 5; ++l) EXPECT_EQ(x(0, 3 + l), l == 2 ? 1.0 : 0.0);
}

TEST(Gnn, IdenticalSymmetricNodesShareEmbeddings) {
  Adjacency adj(2, false);
  adj.add(0, 1);
  Mat x(2, 3);
  x << 1, 2, 3, 1, 2, 3;
  const auto params = GnnParams::init(3, 4, 2, 5);
  const Mat h = embed_demographics(adj, x, params);
  EXPECT_TRUE(h.row(0).isApprox(h.row(1), 0.0));
}

TEST(Gnn, IsolatedNodeUsesOnlySelfTerm) {
  Adjacency adj(3, false);
  adj.add(1, 2);
  Rng rng(1);
  const Mat x = random_mat(rng, 3, 4);
  const auto params = GnnParams::init(4, 3, 1, 2);
  const Mat h = embed_demographics(adj, x, params);
  const auto& l = params.layers[0];
  const Vec expected = (l.w_self * x.row(0).transpose() + l.bias).array().tanh();
  EXPECT_TRUE(h.row(0).transpose().isApprox(expected, 1e-14));
}

TEST(Gnn, PathGraphMatchesHandComputation) {
  Adjacency adj(3, false);
  adj.add(0, 1);
  adj.add(1, 2);
  Mat x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  GnnParams params;
  GnnLayer layer;
  layer.w_self = (Mat(2, 2) << 1, 0, 0, 1).finished();
  layer.w_nbr = (Mat(2, 2) << 0.5, 0, 0, -0.5).finished();
  layer.bias = (Vec(2) << 0.1, 0).finished();
  params.layers.push_back(layer);
  const Mat h = embed_demographics(adj, x, params);
  // node 0: self (1,0), mean nbr (0,1) -> (1 + 0 + 0.1, 0 - 0.5) = (1.1, -0.5)
  // node 1: self (0,1), mean nbr (1,0.5) -> (0.5 + 0.1, 1 - 0.25) = (0.6, 0.75)
  // node 2: self (1,1), mean nbr (0,1) -> (1 + 0.1, 1 - 0.5) = (1.1, 0.5)
  Mat expected(3, 2);
  expected << std::tanh(1.1), std::tanh(-0.5), std::tanh(0.6), std::tanh(0.75), std::tanh(1.1), std::tanh(0.5);
  EXPECT_TRUE(h.isApprox(expected, 1e-14));
}

TEST(Gnn, RelabelingPermutesEmbeddings) {
  Rng rng(9);
  const int n = 7;
  Adjacency adj(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < 0.4) adj.add(i, j);
    }
  }
  const Mat x = random_mat(rng, n, 5);
  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  Adjacency padj(n, false);
  for (auto [i, j] : adj.edges()) padj.add(perm[i], perm[j]);
  Mat px(n, 5);
  for (int i = 0; i < n; ++i) px.row(perm[i]) = x.row(i);
  const auto params = GnnParams::init(5, 4, 2, 3);
  const Mat h = embed_demographics(adj, x, params);
  const Mat ph = embed_demographics(padj, px, params);
  for (int i = 0; i < n; ++i) EXPECT_TRUE(ph.row(perm[i]).isApprox(h.row(i), 1e-12));
}

TEST(Text, EmptyPostsGiveZeroVector) {
  EXPECT_TRUE(embed_posts({}, 16).isZero(0.0));
}

TEST(Text, BagOfTokensIgnoresOrder) {
  EXPECT_TRUE(embed_text("football goal match", 16).isApprox(embed_text("match football goal", 16), 0.0));
  std::vector<Post> a = {{0, "vote election", 1}, {1, "exam lecture", 1}};
  std::vector<Post> b = {a[1], a[0]};
  EXPECT_EQ(embed_posts(a, 32), embed_posts(b, 32));
}

TEST(Text, NonEmptyPostsAreUnitNorm) {
  const auto ds = evolvex::testing::tiny_dataset(3);
  for (const auto& posts : ds.snapshots[0].posts) {
    const Vec v = embed_posts(posts, 32);
    EXPECT_NEAR(v.norm(), 1.0, 1e-9);
    EXPECT_TRUE(v.allFinite());
  }
}

TEST(Text, StopWordsRemoved) {
  EXPECT_EQ(tokenize("The vote and THE goal", true), (std::vector<std::string>{"vote", "goal"}));
  EXPECT_EQ(tokenize("The vote", false), (std::vector<std::string>{"the", "vote"}));
}

TEST(Engagement, SummaryFormat) {
  const std::vector<std::string> cats = {"Politics", "Education"};
  EXPECT_EQ(summarize_engagement(record({{100, 50, 20}, {0, 0, 0}}), cats),
            "Politics: 100 reactions, 50 comments, 20 shares");
  EXPECT_EQ(summarize_engagement(record({{0, 0, 0}, {0, 0, 0}}), cats), "no engagement");
  EXPECT_EQ(summarize_engagement(record({{1, 0, 0}, {2, 0, 0}}), cats),
            "Politics: 1 reactions, 0 comments, 0 shares; Education: 2 reactions, 0 comments, 0 shares");
}

TEST(Engagement, MinMaxScaling) {
  EngagementBounds b{{1, 2, 3}, {5, 6, 7}};
  EXPECT_EQ(scale_engagement(record({{5, 6, 7}}), b), Vec::Ones(3));
  EXPECT_EQ(scale_engagement(record({{1, 2, 3}}), b), Vec::Zero(3));
  EngagementBounds flat{{4, 4, 4}, {4, 4, 4}};
  EXPECT_EQ(scale_engagement(record({{4, 4, 4}}), flat), Vec::Zero(3));
  const std::vector<std::string> cats = {"Politics"};
  EXPECT_EQ(embed_engagement(record({{3, 3, 3}}), b, cats, 8), embed_engagement(record({{3, 3, 3}}), b, cats, 8));
}

TEST(Encoder, StatisticsComeFromConditioningOnly) {
  auto c = evolvex::testing::tiny_config(10, 8);
  const auto full = mark_holdout(generate(c, 5), 4);
  const auto cond = conditioning_part(full);
  const auto from_cond = fit_engagement_bounds(cond);
  const auto from_full = fit_engagement_bounds(full);
  EXPECT_NE(from_cond.max, from_full.max);
  const auto enc = Encoder::fit(cond, EncoderConfig{}, 1);
  EXPECT_EQ(enc.bounds.max, from_cond.max);
}

TEST(Encoder, EveryBlockFiniteWithDeclaredWidth) {
  const auto ds = evolvex::testing::tiny_dataset(8);
  EncoderConfig cfg;
  cfg.dim = 12;
  const auto enc = Encoder::fit(ds, cfg, 3);
  for (const auto& snap : ds.snapshots) {
    const auto raw = enc.encode(snap, ds.profiles);
    EXPECT_EQ(raw.demographic.cols(), 12);
    EXPECT_EQ(raw.posts.cols(), 12);
    EXPECT_EQ(raw.engagement.cols(), 3 * ds.category_count() + 12);
    EXPECT_TRUE(raw.demographic.allFinite() && raw.posts.allFinite() && raw.engagement.allFinite());
  }
}

TEST(ExternalEncoder, ZeroVectorStubFeedsPipeline) {
  EncoderServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t k = 0; k < body["texts"].size(); ++k) vectors.push_back(std::vector<double>(8, 0.0));
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  const auto ds = evolvex::testing::tiny_dataset(2);
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.external = ExternalEncoderConfig{server.url(), 2000};
  const auto enc = Encoder::fit(ds, cfg, 1);
  const auto raw = enc.encode(ds.snapshots[0], ds.profiles);
  EXPECT_TRUE(raw.posts.isZero(0.0));
}

TEST(ExternalEncoder, WrongDimensionIsReported) {
  EncoderServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t k = 0; k < body["texts"].size(); ++k) vectors.push_back(std::vector<double>(3, 0.0));
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  try {
    external_encode({"a", "b"}, ExternalEncoderConfig{server.url(), 2000}, 8);
    FAIL() << "expected a dimension mismatch";
  } catch (const ExternalEncodeError& e) {
    EXPECT_EQ(e.kind(), ExternalEncodeErrorKind::DimensionMismatch);
  }
}

TEST(ExternalEncoder, UnreachableEndpointIsTransportError) {
  try {
    external_encode({"a"}, ExternalEncoderConfig{"http://127.0.0.1:1/encode", 300}, 8);
    FAIL() << "expected a transport error";
  } catch (const ExternalEncodeError& e) {
    EXPECT_EQ(e.kind(), ExternalEncodeErrorKind::Transport);
  }
}

TEST(ExternalEncoder, FallsBackToHashingWhenUnreachable) {
  const auto ds = evolvex::testing::tiny_dataset(2);
  EncoderConfig cfg;
  cfg.dim = 8;
  const auto builtin = Encoder::fit(ds, cfg, 1).encode(ds.snapshots[0], ds.profiles);
  cfg.external = ExternalEncoderConfig{"http://127.0.0.1:1/encode", 300};
  const auto fallback = Encoder::fit(ds, cfg, 1).encode(ds.snapshots[0], ds.profiles);
  EXPECT_EQ(builtin.posts, fallback.posts);
}
