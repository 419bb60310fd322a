#include "evolvex/cli.hpp"

#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "evolvex/api.hpp"
#include "evolvex/config.hpp"
#include "evolvex/evaluate.hpp"
#include "evolvex/json_util.hpp"
#include "evolvex/promptgen.hpp"
#include "evolvex/train.hpp"

namespace evolvex::cli {

using nlohmann::json;

namespace {

struct Paths {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string trace;
};

std::string in_output_dir(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_output(const json& doc, const std::string& path) {
  ensure_parent(path);
  write_json_file(doc, path);
}

int cmd_generate(const RunConfig& c, const Paths& p, std::ostream& out) {
  const auto ds = mark_holdout(generate(c.generator, c.data_seed), c.horizon);
  const auto path = p.out.empty() ? in_output_dir(c, "dataset.json") : p.out;
  ensure_parent(path);
  save_dataset(ds, path);
  out << fmt::format("users {}, steps {}, held out {}\nedges per step:", ds.users(), ds.steps(), ds.holdout);
  for (const auto& snap : ds.snapshots) out << ' ' << snap.adjacency.edge_count();
  out << fmt::format("\nwrote {}\n", path);
  return kExitOk;
}

int cmd_train(const RunConfig& c, const Paths& p, std::ostream& out) {
  const auto ds = load_dataset(p.data);
  const auto result = train(conditioning_part(ds), c.model, c.train);
  const std::string tag(to_string(c.train.strategy));
  const auto path = p.out.empty() ? in_output_dir(c, fmt::format("checkpoint_{}.json", tag)) : p.out;
  const auto trace_path = p.trace.empty() ? in_output_dir(c, fmt::format("loss_{}.json", tag)) : p.trace;
  const auto& tr = result.trace;
  Checkpoint ck{result.model, train_config_to_json(c.train),
                {{"total", tr.total.back()}, {"link", tr.link.back()}, {"activity", tr.activity.back()}}};
  ensure_parent(path);
  save_checkpoint(ck, path);
  write_output(loss_trace_to_json(tr), trace_path);
  out << fmt::format("strategy {}, epochs {}, final loss {:.6f} (link {:.6f}, activity {:.6f})\nwrote {}\nwrote {}\n",
                     tag, c.train.epochs, tr.total.back(), tr.link.back(), tr.activity.back(), path, trace_path);
  return kExitOk;
}

int cmd_eval(const RunConfig& c, const Paths& p, std::ostream& out) {
  const auto ds = load_dataset(p.data);
  const auto ck = load_checkpoint(p.checkpoint);
  const auto report = evaluate_model(ck.model, ds, c.eval_seed, c.train.negative_ratio);
  const auto path = p.out.empty() ? in_output_dir(c, fmt::format("report_{}.json", report.strategy)) : p.out;
  write_output(report_to_json(report), path);
  out << report_table(report) << fmt::format("wrote {}\n", path);
  return kExitOk;
}

int cmd_forecast(const RunConfig& c, const Paths& p, std::ostream& out) {
  const auto ds = load_dataset(p.data);
  const auto ck = load_checkpoint(p.checkpoint);
  const auto forecast = rollout(conditioning_part(ds), ck.model, c.horizon);
  const auto path = p.out.empty() ? in_output_dir(c, "forecast.json") : p.out;
  write_output(forecast_to_json(forecast), path);
  out << fmt::format("{} stages\nwrote {}\n", forecast.stages.size(), path);
  return kExitOk;
}

int cmd_prompt(const RunConfig& c, const Paths& p, int user, int stage, std::ostream& out) {
  const auto ds = load_dataset(p.data);
  if (user >= 0) {
    out << render(build_prompt(user, conditioning_part(ds), stage));
    return kExitOk;
  }
  const auto report = evaluate_llm_path(ds, c.llm, std::min(c.horizon, ds.holdout), c.eval_seed);
  const auto path = p.out.empty() ? in_output_dir(c, "report_llm.json") : p.out;
  write_output(report_to_json(report), path);
  out << report_table(report) << fmt::format("wrote {}\n", path);
  return kExitOk;
}

int cmd_serve(const Paths& p, const ServeOptions& options, std::ostream& out, std::ostream& err) {
  ApiService service;
  std::thread loader([&] {
    try {
      const auto ds = load_dataset(p.data);
      const auto ck = load_checkpoint(p.checkpoint);
      service.load(std::make_shared<const ServeState>(ServeState::build(ds, ck.model)));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      std::exit(kExitRuntime);
    }
  });
  loader.detach();
  out << fmt::format("serving on http://{}:{}\n", options.host, options.port) << std::flush;
  serve(service, options);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }

  CLI::App app{"Temporal social-network evolution forecasting"};
  app.require_subcommand(1);
  app.add_option("--output-dir", config.output_dir, "Directory for default output paths");

  Paths paths;
  std::string strategy(to_string(config.train.strategy));
  std::string objective(to_string(config.train.weights.activity));
  std::string provider(to_string(config.llm.kind));
  int prompt_user = -1;
  int prompt_stage = 1;
  ServeOptions serve_options;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic temporal dataset");
  gen->add_option("--users", config.generator.users);
  gen->add_option("--steps", config.generator.steps);
  gen->add_option("--seed", config.data_seed);
  gen->add_option("--homophily", config.generator.homophily);
  gen->add_option("--closure", config.generator.closure);
  gen->add_option("--drift", config.generator.drift);
  gen->add_flag("--directed", config.generator.directed);
  gen->add_option("--horizon", config.horizon, "Trailing snapshots held out");
  gen->add_option("--out", paths.out);

  auto* tr = app.add_subcommand("train", "Train a model on the conditioning snapshots");
  tr->add_option("--data", paths.data)->required();
  tr->add_option("--strategy", strategy, "concat | attention | crossmodal");
  tr->add_option("--lambda1", config.train.weights.lambda1, "Link loss weight");
  tr->add_option("--lambda2", config.train.weights.lambda2, "Activity loss weight");
  tr->add_option("--activity-objective", objective, "soft_bce | weighted");
  tr->add_option("--epochs", config.train.epochs);
  tr->add_option("--lr", config.train.learning_rate);
  tr->add_option("--negative-ratio", config.train.negative_ratio);
  tr->add_option("--seed", config.train.seed);
  tr->add_option("--dim", config.model.encoder.dim);
  tr->add_option("--out", paths.out);
  tr->add_option("--trace", paths.trace);

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the held-out snapshots");
  ev->add_option("--data", paths.data)->required();
  ev->add_option("--checkpoint", paths.checkpoint)->required();
  ev->add_option("--seed", config.eval_seed);
  ev->add_option("--out", paths.out);

  auto* fc = app.add_subcommand("forecast", "Roll a checkpoint forward over the next stages");
  fc->add_option("--data", paths.data)->required();
  fc->add_option("--checkpoint", paths.checkpoint)->required();
  fc->add_option("--horizon", config.horizon);
  fc->add_option("--out", paths.out);

  auto* pr = app.add_subcommand("prompt", "Render prompts or score a completion provider");
  pr->add_option("--data", paths.data)->required();
  pr->add_option("--provider", provider, "stub | external");
  pr->add_option("--url", config.llm.url);
  pr->add_option("--model", config.llm.model);
  pr->add_option("--timeout-ms", config.llm.timeout_ms);
  pr->add_option("--concurrency", config.llm.concurrency);
  pr->add_option("--horizon", config.horizon);
  pr->add_option("--seed", config.eval_seed);
  pr->add_option("--user", prompt_user, "Print the prompt for this user instead of scoring");
  pr->add_option("--stage", prompt_stage);
  pr->add_option("--out", paths.out);

  auto* sv = app.add_subcommand("serve", "Serve forecasts over HTTP");
  sv->add_option("--data", paths.data)->required();
  sv->add_option("--checkpoint", paths.checkpoint)->required();
  sv->add_option("--host", serve_options.host);
  sv->add_option("--port", serve_options.port);
  sv->add_option("--cors-origin", serve_options.cors_origin);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    config.train.strategy = parse_strategy(strategy);
    config.model.strategy = config.train.strategy;
    config.train.weights.activity = parse_activity_objective(objective);
    config.llm.kind = parse_provider(provider);
    config.validate();

    if (*gen) return cmd_generate(config, paths, out);
    if (*tr) return cmd_train(config, paths, out);
    if (*ev) return cmd_eval(config, paths, out);
    if (*fc) return cmd_forecast(config, paths, out);
    if (*pr) return cmd_prompt(config, paths, prompt_user, prompt_stage, out);
    if (*sv) return cmd_serve(paths, serve_options, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace evolvex::cli
