#include "evolvex/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>

#include <fmt/core.h>

#include "evolvex/json_util.hpp"

namespace evolvex {

using nlohmann::json;

void RunConfig::validate() const {
  generator.validate();
  if (horizon < 1 || horizon > 4) throw ConfigError(fmt::format("horizon must lie in [1, 4], got {}", horizon));
  if (horizon >= generator.steps) {
    throw ConfigError(fmt::format("horizon {} leaves no conditioning steps out of {}", horizon, generator.steps));
  }
  if (model.encoder.dim < 1 || model.hidden < 1 || model.out < 1) throw ConfigError("model widths must be >= 1");
  if (model.encoder.gnn_layers < 1) throw ConfigError("gnn_layers must be >= 1");
  train.validate();
  llm.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

namespace {

using Setter = std::function<void(const json&)>;

template <class T>
Setter field(T& target, const std::string& key) {
  return [&target, key](const json& v) {
    try {
      target = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("config key '{}' has the wrong type", key));
    }
  };
}

void apply_section(const json& doc, const std::string& prefix, const std::map<std::string, Setter>& setters) {
  if (!doc.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", prefix));
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(fmt::format("unknown config key '{}{}'", prefix, key));
    it->second(value);
  }
}

}  // namespace

void apply_config(RunConfig& c, const json& doc) {
  auto& g = c.generator;
  auto& t = c.train;
  auto& l = c.llm;
  std::string strategy(to_string(t.strategy));
  std::string objective(to_string(t.weights.activity));
  std::string provider(to_string(l.kind));

  const std::map<std::string, Setter> dataset = {
      {"users", field(g.users, "dataset.users")},
      {"steps", field(g.steps, "dataset.steps")},
      {"homophily", field(g.homophily, "dataset.homophily")},
      {"closure", field(g.closure, "dataset.closure")},
      {"drift", field(g.drift, "dataset.drift")},
      {"directed", field(g.directed, "dataset.directed")},
      {"base_edge_rate", field(g.base_edge_rate, "dataset.base_edge_rate")},
      {"formation_rate", field(g.formation_rate, "dataset.formation_rate")},
      {"sociability_spread", field(g.sociability_spread, "dataset.sociability_spread")},
      {"min_posts", field(g.min_posts, "dataset.min_posts")},
      {"max_posts", field(g.max_posts, "dataset.max_posts")},
      {"seed", field(c.data_seed, "dataset.seed")},
      {"horizon", field(c.horizon, "dataset.horizon")}};
  const std::map<std::string, Setter> model = {
      {"dim", field(c.model.encoder.dim, "model.dim")},
      {"gnn_layers", field(c.model.encoder.gnn_layers, "model.gnn_layers")},
      {"hidden", field(c.model.hidden, "model.hidden")},
      {"out", field(c.model.out, "model.out")}};
  const std::map<std::string, Setter> train = {
      {"strategy", field(strategy, "train.strategy")},
      {"epochs", field(t.epochs, "train.epochs")},
      {"learning_rate", field(t.learning_rate, "train.learning_rate")},
      {"negative_ratio", field(t.negative_ratio, "train.negative_ratio")},
      {"seed", field(t.seed, "train.seed")},
      {"lambda1", field(t.weights.lambda1, "train.lambda1")},
      {"lambda2", field(t.weights.lambda2, "train.lambda2")},
      {"activity_objective", field(objective, "train.activity_objective")}};
  const std::map<std::string, Setter> llm = {
      {"provider", field(provider, "llm.provider")},
      {"url", field(l.url, "llm.url")},
      {"model", field(l.model, "llm.model")},
      {"timeout_ms", field(l.timeout_ms, "llm.timeout_ms")},
      {"concurrency", field(l.concurrency, "llm.concurrency")}};
  ExternalEncoderConfig external = c.model.encoder.external.value_or(ExternalEncoderConfig{});
  bool external_touched = false;
  const std::map<std::string, Setter> encoder_external = {
      {"url", field(external.url, "embed.external.url")},
      {"timeout_ms", field(external.timeout_ms, "embed.external.timeout_ms")}};
  const std::map<std::string, Setter> embed = {{"external", [&](const json& v) {
                                                  apply_section(v, "embed.external.", encoder_external);
                                                  external_touched = true;
                                                }}};
  const std::map<std::string, Setter> top = {
      {"dataset", [&](const json& v) { apply_section(v, "dataset.", dataset); }},
      {"embed", [&](const json& v) { apply_section(v, "embed.", embed); }},
      {"model", [&](const json& v) { apply_section(v, "model.", model); }},
      {"train", [&](const json& v) { apply_section(v, "train.", train); }},
      {"llm", [&](const json& v) { apply_section(v, "llm.", llm); }},
      {"eval_seed", field(c.eval_seed, "eval_seed")},
      {"output_dir", field(c.output_dir, "output_dir")}};
  apply_section(doc, "", top);

  t.strategy = parse_strategy(strategy);
  t.weights.activity = parse_activity_objective(objective);
  l.kind = parse_provider(provider);
  c.model.strategy = t.strategy;
  // An empty url switches the external encoder off.
  if (external_touched) {
    c.model.encoder.external = external.url.empty() ? std::nullopt : std::optional(external);
  }
}

json run_config_to_json(const RunConfig& c) {
  const auto& g = c.generator;
  return {{"dataset",
           {{"users", g.users},
            {"steps", g.steps},
            {"homophily", g.homophily},
            {"closure", g.closure},
            {"drift", g.drift},
            {"directed", g.directed},
            {"base_edge_rate", g.base_edge_rate},
            {"formation_rate", g.formation_rate},
            {"sociability_spread", g.sociability_spread},
            {"min_posts", g.min_posts},
            {"max_posts", g.max_posts},
            {"seed", c.data_seed},
            {"horizon", c.horizon}}},
          {"embed",
           {{"external",
             {{"url", c.model.encoder.external ? c.model.encoder.external->url : std::string()},
              {"timeout_ms", c.model.encoder.external.value_or(ExternalEncoderConfig{}).timeout_ms}}}}},
          {"model",
           {{"dim", c.model.encoder.dim},
            {"gnn_layers", c.model.encoder.gnn_layers},
            {"hidden", c.model.hidden},
            {"out", c.model.out}}},
          {"train",
           {{"strategy", std::string(to_string(c.train.strategy))},
            {"epochs", c.train.epochs},
            {"learning_rate", c.train.learning_rate},
            {"negative_ratio", c.train.negative_ratio},
            {"seed", c.train.seed},
            {"lambda1", c.train.weights.lambda1},
            {"lambda2", c.train.weights.lambda2},
            {"activity_objective", std::string(to_string(c.train.weights.activity))}}},
          {"llm",
           {{"provider", std::string(to_string(c.llm.kind))},
            {"url", c.llm.url},
            {"model", c.llm.model},
            {"timeout_ms", c.llm.timeout_ms},
            {"concurrency", c.llm.concurrency}}},
          {"eval_seed", c.eval_seed},
          {"output_dir", c.output_dir}};
}

std::optional<std::string> config_path() {
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) {
    if (!std::filesystem::exists(env)) throw ConfigError(fmt::format("{} names a missing file: {}", kConfigEnvVar, env));
    return std::string(env);
  }
  if (std::filesystem::exists(kConfigFileName)) return std::string(kConfigFileName);
  return std::nullopt;
}

RunConfig load_run_config() {
  RunConfig config;
  if (const auto path = config_path()) {
    json doc;
    try {
      doc = read_json_file(*path);
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("cannot parse {}: {}", *path, e.what()));
    }
    apply_config(config, doc);
  }
  return config;
}

}  // namespace evolvex
