#pragma once

// Role-based prompts built from a user's record, completion providers (an
// offline stub and an external chat endpoint) and lenient forecast parsing.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evolvex/evaluate.hpp"
#include "evolvex/graphgen.hpp"

namespace evolvex {

// 2-hop neighbours kept in the graph section, highest degree first.
inline constexpr int kPromptNeighborLimit = 50;

inline constexpr const char* kDataSectionLabels[4] = {"User Graph", "User History", "User Engagement Scores",
                                                      "User Demography"};

struct DataSection {
  std::string label;
  std::string body;
};

struct PromptBundle {
  std::string role;
  std::string task;
  std::string context;
  std::string instructions;
  std::vector<DataSection> data;  // always the four labels above, in order
  std::string response_schema;

  // Not rendered. The stub provider draws its connections from `candidates`.
  int user = 0;
  int stage = 1;
  int user_count = 0;
  int category_count = 0;
  std::vector<int> candidates;
};

// Throws ConfigError for an unknown user or a stage outside [1, 4].
PromptBundle build_prompt(int user, const TemporalDataset& history, int stage);
std::string render(const PromptBundle& bundle);
std::string response_schema_text(int category_count);

struct ConnectionForecast {
  int id = 0;
  double confidence = 0.0;
};

struct LlmForecast {
  std::vector<ConnectionForecast> connections;
  std::vector<double> activities;
  int stage = 1;
  std::string rationale;
};

enum class ParseErrorCode { NoJson, SchemaViolation, UnknownUser, OutOfRange };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ParseErrorCode code() const { return code_; }

 private:
  ParseErrorCode code_;
};

// Takes the first complete JSON object in `text` that parses, so prose and
// code fences around it are ignored.
LlmForecast parse_response(const std::string& text, int user_count, int category_count);
nlohmann::json forecast_json(const LlmForecast& forecast);

enum class ProviderKind { Stub, External };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Stub;
  std::string url;
  std::string model;
  int timeout_ms = 30000;
  int concurrency = 4;

  void validate() const;
};

ProviderKind parse_provider(std::string_view name);
std::string_view to_string(ProviderKind kind);

enum class CompletionErrorKind { Transport, Timeout };

class CompletionError : public std::runtime_error {
 public:
  CompletionError(CompletionErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CompletionErrorKind kind() const { return kind_; }

 private:
  CompletionErrorKind kind_;
};

// Deterministic schema-valid answer seeded by a hash of the rendered prompt.
std::string stub_complete(const PromptBundle& bundle);
// POST {model, messages:[{role, content}]} -> {content}.
std::string external_complete(const PromptBundle& bundle, const ProviderConfig& config);
std::string complete(const PromptBundle& bundle, const ProviderConfig& config);

using CompletionFn = std::function<std::string(const PromptBundle&)>;

// forecasts[s][u] is user u's parsed answer for stage s + 1, or empty when it
// failed. Undirected scores take the larger of the two users' confidences.
std::vector<StagePrediction> predictions_from_forecasts(
    const std::vector<std::vector<std::optional<LlmForecast>>>& forecasts, int users, int categories,
    bool directed);

struct LlmSweep {
  std::vector<std::vector<std::optional<LlmForecast>>> forecasts;
  int failures = 0;
};

// One prompt per user and stage over the conditioning part of `full`.
// Completion and parse errors are counted, never thrown.
LlmSweep run_llm_sweep(const TemporalDataset& full, const CompletionFn& provider, int horizon, int concurrency = 1);

EvalReport evaluate_llm_path(const TemporalDataset& full, const CompletionFn& provider, int horizon,
                             std::uint64_t seed = 0, int concurrency = 1);
EvalReport evaluate_llm_path(const TemporalDataset& full, const ProviderConfig& provider, int horizon,
                             std::uint64_t seed = 0);

}  // namespace evolvex
