#include "evolvex/promptgen.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include <fmt/core.h>
#include <httplib.h>

#include "evolvex/embed.hpp"
#include "evolvex/external.hpp"
#include "evolvex/rng.hpp"

namespace evolvex {

using nlohmann::json;

namespace {

constexpr int kMaxStage = 4;

const char* kRole =
    "You are a data scientist who studies how people in an online social network form connections and "
    "shift their posting interests over time.";

const char* kContext =
    "Users are identified only by opaque numeric ids. Each step is one observation period. Activity "
    "categories are fixed and listed in the history section.";

// Kept 2-hop neighbours: highest degree first, ties by id.
std::vector<int> two_hop(const Adjacency& adj, int user) {
  std::set<int> seen;
  for (int j : adj.neighbors(user)) {
    seen.insert(j);
    for (int k : adj.neighbors(j)) seen.insert(k);
  }
  seen.erase(user);
  std::vector<int> out(seen.begin(), seen.end());
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return adj.degree(a) > adj.degree(b); });
  if (out.size() > static_cast<std::size_t>(kPromptNeighborLimit)) out.resize(kPromptNeighborLimit);
  return out;
}

std::string graph_section(const Adjacency& adj, int user, const std::vector<int>& kept) {
  if (adj.degree(user) == 0) return "no connections";
  std::vector<int> nodes = kept;
  nodes.push_back(user);
  std::sort(nodes.begin(), nodes.end());
  std::string out;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = adj.directed() ? 0 : a + 1; b < nodes.size(); ++b) {
      if (a == b || !adj.has(nodes[a], nodes[b])) continue;
      if (!out.empty()) out += '\n';
      out += fmt::format("{} {} {}", nodes[a], adj.directed() ? "->" : "--", nodes[b]);
    }
  }
  return out;
}

std::string history_section(const TemporalDataset& ds, int user) {
  std::string out;
  for (int t = 0; t < ds.steps(); ++t) {
    const auto counts = ds.category_counts(t, user);
    std::string line = fmt::format("step {}:", ds.snapshots[t].step);
    for (int c = 0; c < ds.category_count(); ++c) {
      line += fmt::format("{} {} {}", c ? "," : "", ds.categories[c], static_cast<long>(counts[c]));
    }
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

std::string engagement_section(const TemporalDataset& ds, int user) {
  std::string out;
  for (const auto& snap : ds.snapshots) {
    if (!out.empty()) out += '\n';
    out += fmt::format("step {}: {}", snap.step, summarize_engagement(snap.engagement[user], ds.categories));
  }
  return out;
}

std::string demography_section(const TemporalDataset& ds, int user) {
  const auto& p = ds.profiles[user];
  const auto& v = ds.vocabularies;
  return fmt::format("age: {}\ngender: {}\noccupation: {}\ncountry: {}", p.age, v.genders.at(p.gender),
                     v.occupations.at(p.occupation), v.locations.at(p.location));
}

}  // namespace

std::string response_schema_text(int category_count) {
  const json schema = {
      {"type", "object"},
      {"required", {"connections", "activities", "stage"}},
      {"properties",
       {{"connections",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"required", {"id", "confidence"}},
            {"properties",
             {{"id", {{"type", "integer"}}}, {"confidence", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}}}}}},
        {"activities",
         {{"type", "array"},
          {"minItems", category_count},
          {"maxItems", category_count},
          {"items", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}},
        {"stage", {{"type", "integer"}, {"minimum", 1}, {"maximum", kMaxStage}}},
        {"rationale", {{"type", "string"}}}}}};
  return schema.dump(2);
}

PromptBundle build_prompt(int user, const TemporalDataset& history, int stage) {
  if (user < 0 || user >= history.users()) throw ConfigError(fmt::format("unknown user {}", user));
  if (stage < 1 || stage > kMaxStage) throw ConfigError(fmt::format("stage must lie in [1, 4], got {}", stage));
  if (history.steps() < 1) throw ConfigError("prompt history has no snapshots");

  const auto& adj = history.snapshots.back().adjacency;
  const int last = history.snapshots.back().step;
  PromptBundle b;
  b.user = user;
  b.stage = stage;
  b.user_count = history.users();
  b.category_count = history.category_count();
  b.role = kRole;
  b.task = fmt::format(
      "Forecast evolution stage {} of user {}: the connections the user will have gained and the activity level "
      "in each category at step {}, which is {} step(s) after the last observed step {}.",
      stage, user, last + stage, stage, last);
  b.context = kContext;
  const auto kept = two_hop(adj, user);
  for (int j : kept) {
    if (!adj.has(user, j)) b.candidates.push_back(j);
  }
  b.data = {{kDataSectionLabels[0], graph_section(adj, user, kept)},
            {kDataSectionLabels[1], history_section(history, user)},
            {kDataSectionLabels[2], engagement_section(history, user)},
            {kDataSectionLabels[3], demography_section(history, user)}};
  b.response_schema = response_schema_text(history.category_count());
  b.instructions = fmt::format(
      "Reply with a single JSON object matching the schema below and nothing else. List predicted new "
      "connections as ids between 0 and {} with a confidence in [0, 1]. Give one activity probability in [0, 1] "
      "per category, in the order used in the history section. Set stage to {}.",
      history.users() - 1, stage);
  return b;
}

std::string render(const PromptBundle& b) {
  std::string out = fmt::format("## Role\n{}\n\n## Task\n{}\n\n## Context\n{}\n\n## Data\n", b.role, b.task, b.context);
  for (const auto& s : b.data) out += fmt::format("### {}\n{}\n\n", s.label, s.body);
  out += fmt::format("## Instructions\n{}\n\nResponse schema:\n{}\n", b.instructions, b.response_schema);
  return out;
}

namespace {

// End of the balanced object starting at `start`, or npos.
std::size_t object_end(const std::string& text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t k = start; k < text.size(); ++k) {
    const char c = text[k];
    if (in_string) {
      if (c == '\\') ++k;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return k;
  }
  return std::string::npos;
}

[[noreturn]] void schema_error(const std::string& what) { throw ParseError(ParseErrorCode::SchemaViolation, what); }

}  // namespace

LlmForecast parse_response(const std::string& text, int user_count, int category_count) {
  json doc;
  bool found = false;
  for (std::size_t pos = text.find('{'); pos != std::string::npos; pos = text.find('{', pos + 1)) {
    const auto end = object_end(text, pos);
    if (end == std::string::npos) continue;
    doc = json::parse(text.substr(pos, end - pos + 1), nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) {
      found = true;
      break;
    }
  }
  if (!found) throw ParseError(ParseErrorCode::NoJson, "no JSON object in response");

  for (const char* key : {"connections", "activities", "stage"}) {
    if (!doc.contains(key)) schema_error(fmt::format("missing field '{}'", key));
  }
  const auto& conns = doc["connections"];
  const auto& acts = doc["activities"];
  if (!conns.is_array()) schema_error("connections must be an array");
  if (!acts.is_array() || static_cast<int>(acts.size()) != category_count) {
    schema_error(fmt::format("activities must be an array of {} numbers", category_count));
  }
  if (!doc["stage"].is_number_integer()) schema_error("stage must be an integer");

  LlmForecast f;
  f.stage = doc["stage"].get<int>();
  if (f.stage < 1 || f.stage > kMaxStage) schema_error(fmt::format("stage {} outside [1, 4]", f.stage));
  for (const auto& c : conns) {
    if (!c.is_object() || !c.contains("id") || !c.contains("confidence")) {
      schema_error("each connection needs id and confidence");
    }
    if (!c["id"].is_number_integer() || !c["confidence"].is_number()) schema_error("connection field has wrong type");
    ConnectionForecast cf{c["id"].get<int>(), c["confidence"].get<double>()};
    if (cf.id < 0 || cf.id >= user_count) throw ParseError(ParseErrorCode::UnknownUser, fmt::format("unknown user id {}", cf.id));
    if (!(cf.confidence >= 0.0 && cf.confidence <= 1.0)) {
      throw ParseError(ParseErrorCode::OutOfRange, fmt::format("confidence {} outside [0, 1]", cf.confidence));
    }
    f.connections.push_back(cf);
  }
  for (const auto& a : acts) {
    if (!a.is_number()) schema_error("activities must be numbers");
    const double v = a.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError(ParseErrorCode::OutOfRange, fmt::format("activity {} outside [0, 1]", v));
    f.activities.push_back(v);
  }
  if (doc.contains("rationale")) {
    if (!doc["rationale"].is_string()) schema_error("rationale must be a string");
    f.rationale = doc["rationale"].get<std::string>();
  }
  return f;
}

json forecast_json(const LlmForecast& f) {
  json conns = json::array();
  for (const auto& c : f.connections) conns.push_back({{"id", c.id}, {"confidence", c.confidence}});
  return {{"connections", std::move(conns)}, {"activities", f.activities}, {"stage", f.stage}, {"rationale", f.rationale}};
}

void ProviderConfig::validate() const {
  if (kind == ProviderKind::External && url.empty()) throw ConfigError("external provider needs llm.url");
  if (timeout_ms < 1) throw ConfigError("llm.timeout_ms must be >= 1");
  if (concurrency < 1) throw ConfigError("llm.concurrency must be >= 1");
}

ProviderKind parse_provider(std::string_view name) {
  if (name == "stub") return ProviderKind::Stub;
  if (name == "external") return ProviderKind::External;
  throw ConfigError(fmt::format("unknown provider '{}'", name));
}

std::string_view to_string(ProviderKind kind) { return kind == ProviderKind::Stub ? "stub" : "external"; }

std::string stub_complete(const PromptBundle& bundle) {
  Rng rng(fnv1a(render(bundle)));
  std::string conns;
  const auto take = std::min<std::size_t>(bundle.candidates.size(), 10);
  for (std::size_t k = 0; k < take; ++k) {
    conns += fmt::format("{}{{\"id\": {}, \"confidence\": {:.4f}}}", k ? ", " : "", bundle.candidates[k], rng.uniform());
  }
  std::string acts;
  for (int c = 0; c < bundle.category_count; ++c) acts += fmt::format("{}{:.4f}", c ? ", " : "", rng.uniform());
  return fmt::format(
      "Forecast below.\n```json\n{{\"connections\": [{}], \"activities\": [{}], \"stage\": {}, "
      "\"rationale\": \"stub\"}}\n```\n",
      conns, acts, bundle.stage);
}

std::string external_complete(const PromptBundle& bundle, const ProviderConfig& config) {
  const auto endpoint = Endpoint::parse(config.url);
  httplib::Client client(endpoint.base);
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const json request = {{"model", config.model},
                        {"messages", {{{"role", "system"}, {"content", bundle.role}},
                                      {{"role", "user"}, {"content", render(bundle)}}}}};
  auto res = client.Post(endpoint.path, request.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = err == httplib::Error::ConnectionTimeout ? CompletionErrorKind::Timeout : CompletionErrorKind::Transport;
    throw CompletionError(kind, fmt::format("completion request failed: {}", httplib::to_string(err)));
  }
  if (res->status != 200) {
    throw CompletionError(CompletionErrorKind::Transport, fmt::format("completion endpoint returned HTTP {}", res->status));
  }
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || !body.contains("content") || !body["content"].is_string()) {
    throw CompletionError(CompletionErrorKind::Transport, "completion response lacks a content string");
  }
  return body["content"].get<std::string>();
}

std::string complete(const PromptBundle& bundle, const ProviderConfig& config) {
  return config.kind == ProviderKind::Stub ? stub_complete(bundle) : external_complete(bundle, config);
}

std::vector<StagePrediction> predictions_from_forecasts(
    const std::vector<std::vector<std::optional<LlmForecast>>>& forecasts, int users, int categories,
    bool directed) {
  std::vector<StagePrediction> out;
  for (std::size_t s = 0; s < forecasts.size(); ++s) {
    StagePrediction p{static_cast<int>(s) + 1, Mat::Zero(users, users), Mat::Zero(users, categories)};
    for (int u = 0; u < users; ++u) {
      const auto& f = forecasts[s][static_cast<std::size_t>(u)];
      if (!f) continue;
      for (const auto& c : f->connections) {
        if (c.id == u) continue;
        p.edge_scores(u, c.id) = std::max(p.edge_scores(u, c.id), c.confidence);
        if (!directed) p.edge_scores(c.id, u) = std::max(p.edge_scores(c.id, u), c.confidence);
      }
      for (int c = 0; c < categories; ++c) p.activity(u, c) = f->activities[static_cast<std::size_t>(c)];
    }
    out.push_back(std::move(p));
  }
  return out;
}

LlmSweep run_llm_sweep(const TemporalDataset& full, const CompletionFn& provider, int horizon, int concurrency) {
  if (horizon < 1 || horizon > std::min(full.holdout, kMaxStage)) {
    throw ConfigError(fmt::format("horizon must lie in [1, {}], got {}", std::min(full.holdout, kMaxStage), horizon));
  }
  const auto history = conditioning_part(full);
  const int n = full.users();
  const int k = full.category_count();

  LlmSweep sweep;
  sweep.forecasts.assign(static_cast<std::size_t>(horizon), std::vector<std::optional<LlmForecast>>(n));
  const int tasks = horizon * n;
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  auto worker = [&] {
    for (int task = next++; task < tasks; task = next++) {
      const int s = task / n;
      const int u = task % n;
      try {
        auto f = parse_response(provider(build_prompt(u, history, s + 1)), n, k);
        if (f.stage != s + 1) throw ParseError(ParseErrorCode::SchemaViolation, "forecast answers the wrong stage");
        sweep.forecasts[s][u] = std::move(f);
      } catch (const std::exception&) {
        ++failures;
      }
    }
  };
  const int threads = std::clamp(concurrency, 1, tasks);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  sweep.failures = failures;
  return sweep;
}

EvalReport evaluate_llm_path(const TemporalDataset& full, const CompletionFn& provider, int horizon,
                             std::uint64_t seed, int concurrency) {
  const auto sweep = run_llm_sweep(full, provider, horizon, concurrency);
  auto report = score_stages(full, predictions_from_forecasts(sweep.forecasts, full.users(), full.category_count(),
                                                             full.directed),
                             seed);
  report.strategy = "llm";
  report.parse_failures = sweep.failures;
  return report;
}

EvalReport evaluate_llm_path(const TemporalDataset& full, const ProviderConfig& provider, int horizon,
                             std::uint64_t seed) {
  provider.validate();
  auto report = evaluate_llm_path(
      full, [&](const PromptBundle& b) { return complete(b, provider); }, horizon, seed, provider.concurrency);
  report.strategy = fmt::format("llm:{}", to_string(provider.kind));
  return report;
}

}  // namespace evolvex
