// Copyright 2026 The Recycle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "recycle/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "recycle/dataset.hpp"
#include "recycle/error.hpp"
#include "recycle/gateway.hpp"
#include "recycle/judge.hpp"
#include "recycle/metrics.hpp"
#include "recycle/mock_backends.hpp"
#include "recycle/reflection.hpp"
#include "recycle/util.hpp"

namespace recycle::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";

// --backend / --scorer / --embedder value: live[=MODEL] | replay=DIR |
// mock=NAME.
struct BackendSpec {
  oracle::BackendMode mode = oracle::BackendMode::kLive;
  std::string argument;

  std::string describe() const {
    std::string text(oracle::to_string(mode));
    if (!argument.empty()) text += "=" + argument;
    return text;
  }
};

BackendSpec parse_backend(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  const std::string kind = text.substr(0, eq);
  const std::string arg = eq == std::string::npos ? "" : text.substr(eq + 1);
  if (kind == "live") return {oracle::BackendMode::kLive, arg};
  if (kind == "replay" && !arg.empty()) {
    return {oracle::BackendMode::kReplay, arg};
  }
  if (kind == "mock" && !arg.empty()) return {oracle::BackendMode::kMock, arg};
  throw Error(ErrorKind::kInvalidConfig,
              std::string(flag) + " must be live, replay=DIR or mock=NAME; got `" +
                  text + "`");
}

DatasetFormat parse_format(const std::string& text) {
  return text == "recycled" ? DatasetFormat::kRecycledJson
                            : DatasetFormat::kAlpacaJson;
}

struct LiveEndpoint {
  std::string base_url;
  std::string api_key;
};

LiveEndpoint live_endpoint(Environment& env, const char* url_var,
                           const char* key_var) {
  LiveEndpoint endpoint;
  auto url = env.getenv(url_var);
  if (!url) url = env.getenv("ORACLE_BASE_URL");
  endpoint.base_url = url ? *url : kDefaultBaseUrl;
  auto key = env.getenv(key_var);
  if (!key) key = env.getenv("ORACLE_API_KEY");
  if (!key || key->empty()) {
    throw Error(ErrorKind::kInvalidConfig,
                std::string("live backend needs credentials: set ") + key_var +
                    (std::string(key_var) == "ORACLE_API_KEY"
                         ? ""
                         : " or ORACLE_API_KEY"));
  }
  endpoint.api_key = *key;
  return endpoint;
}

std::vector<std::string> read_string_array(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kIoFailure, "no such file: " + path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedFile, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::kMalformedFile,
                path.string() + ": expected a JSON array of strings");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_string()) {
      throw Error(ErrorKind::kSchemaViolation,
                  path.string() + ": entry " + std::to_string(i) +
                      " is not a string");
    }
    out.push_back(doc[i].get<std::string>());
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::kIoFailure,
                "cannot create output directory " + dir.string() + ": " +
                    ec.message());
  }
}

void write_json(const fs::path& path, const ordered_json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

ordered_json stats_json(const oracle::GatewayStats& stats) {
  ordered_json doc;
  doc["chat_calls"] = stats.chat_calls;
  doc["logprob_calls"] = stats.logprob_calls;
  doc["embedding_calls"] = stats.embedding_calls;
  doc["cache_hits"] = stats.cache_hits;
  doc["retries"] = stats.retries;
  return doc;
}

struct CommonOptions {
  std::string backend = "live";
  int concurrency = 4;
  std::string cache;
  std::string output;
};

// Chat-only gateway for recycle and judge.
std::shared_ptr<oracle::OracleGateway> chat_gateway(
    Environment& env, const BackendSpec& spec, const CommonOptions& common,
    const fs::path& default_cache) {
  oracle::GatewayOptions options;
  options.mode = spec.mode;
  options.concurrency = common.concurrency;
  if (spec.mode == oracle::BackendMode::kReplay) {
    return oracle::OracleGateway::replay(spec.argument, options);
  }
  options.cache_dir = common.cache.empty() ? default_cache : fs::path(common.cache);
  std::shared_ptr<oracle::ChatBackend> chat;
  if (spec.mode == oracle::BackendMode::kMock) {
    chat = oracle::make_mock_chat_backend(spec.argument);
  } else {
    const auto endpoint =
        live_endpoint(env, "ORACLE_BASE_URL", "ORACLE_API_KEY");
    chat = std::make_shared<oracle::OpenAiChatBackend>(
        std::shared_ptr<oracle::HttpTransport>(
            env.make_transport(endpoint.base_url)),
        endpoint.api_key);
  }
  return std::make_shared<oracle::OracleGateway>(options, std::move(chat),
                                                 nullptr, nullptr);
}

int fail(Environment& env, const Error& error, const std::string& output_dir) {
  ordered_json report;
  report["error"] = to_string(error.kind());
  report["message"] = error.what();
  *env.err << report.dump() << '\n';
  if (!output_dir.empty()) {
    std::error_code ec;
    if (fs::is_directory(output_dir, ec)) {
      try {
        write_json(fs::path(output_dir) / "error.json", report);
      } catch (const Error&) {
      }
    }
  }
  return error.kind() == ErrorKind::kInterrupted ? kExitInterrupted
                                                 : kExitFailure;
}

// ---------------------------------------------------------------- recycle

struct RecycleArgs {
  CommonOptions common;
  std::string input;
  std::string format = "alpaca";
  std::string criteria;
  std::string phases = "both";
  int parse_retries = 2;
  bool resume = false;
  std::string oracle_model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 2048;
  std::int64_t seed = 0;
};

int cmd_recycle(const RecycleArgs& args, Environment& env) {
  const fs::path out_dir = args.common.output;
  const auto dataset = load_dataset(args.input, parse_format(args.format));
  const auto spec = parse_backend(args.common.backend, "--backend");
  ensure_dir(out_dir);

  RecycleConfig config;
  config.oracle_model = args.oracle_model;
  config.temperature = args.temperature;
  config.max_tokens = args.max_tokens;
  config.seed = args.seed;
  config.parse_retries = args.parse_retries;
  config.phases = args.phases == "instruction-only"
                      ? PhaseSelection::kInstructionOnly
                      : PhaseSelection::kBoth;
  if (!args.criteria.empty()) {
    config.criteria = load_criteria_file(args.criteria);
  }

  auto gateway = chat_gateway(env, spec, args.common, out_dir / "cache");

  ordered_json resolved;
  resolved["command"] = "recycle";
  resolved["input"] = args.input;
  resolved["format"] = args.format;
  resolved["output"] = out_dir.string();
  resolved["backend"] = spec.describe();
  resolved["cache"] = gateway->options().cache_dir
                          ? gateway->options().cache_dir->string()
                          : "";
  resolved["concurrency"] = args.common.concurrency;
  resolved["resume"] = args.resume;
  resolved["recycle"] = to_json(config);
  write_json(out_dir / "config.json", resolved);

  RecycleRunOptions options;
  options.concurrency = args.common.concurrency;
  options.checkpoint = out_dir / "checkpoint.jsonl";
  options.resume = args.resume;
  options.stop = env.stop;
  const std::size_t step = std::max<std::size_t>(1, dataset.records.size() / 10);
  options.on_progress = [&env, step](std::size_t done, std::size_t total) {
    if (done % step == 0 || done == total) {
      *env.err << "recycled " << done << "/" << total << '\n';
    }
  };

  auto run = recycle_dataset(dataset, config, *gateway, options);

  write_dataset(to_recycled_dataset(run.records), out_dir / "recycled.json");
  std::string transcripts;
  for (const auto& record : run.records) {
    transcripts += to_json(record).dump();
    transcripts += '\n';
  }
  write_file_atomic(out_dir / "transcripts.jsonl", transcripts);

  ordered_json summary = to_json(run.summary);
  summary["oracle_model"] = config.oracle_model;
  summary["oracle"] = stats_json(gateway->stats());
  write_json(out_dir / "summary.json", summary);

  *env.out << format_summary_table(run.summary);
  *env.out << "wrote " << (out_dir / "recycled.json").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  CommonOptions common;
  std::string input;
  std::string compare;
  std::string format = "alpaca";
  std::string compare_format;
  std::string label;
  std::string compare_label;
  std::string scorer;
  std::string embedder;
  std::string scorer_model = "scorer";
  std::string embedder_model = "embedder";
  std::size_t window = 4096;
};

int cmd_report(const ReportArgs& args, Environment& env, bool backend_given) {
  const fs::path out_dir = args.common.output;
  std::vector<DatasetFile> datasets;
  std::vector<std::string> labels;
  datasets.push_back(load_dataset(args.input, parse_format(args.format)));
  labels.push_back(args.label.empty() ? fs::path(args.input).stem().string()
                                      : args.label);
  if (!args.compare.empty()) {
    datasets.push_back(load_dataset(
        args.compare, parse_format(args.compare_format.empty()
                                       ? args.format
                                       : args.compare_format)));
    labels.push_back(args.compare_label.empty()
                         ? fs::path(args.compare).stem().string()
                         : args.compare_label);
  }

  // Per-role backends; --backend fills in replay/live roles left unset.
  auto role_spec = [&](const std::string& explicit_spec, const char* flag,
                       const char* role) -> BackendSpec {
    if (!explicit_spec.empty()) return parse_backend(explicit_spec, flag);
    if (backend_given) {
      auto spec = parse_backend(args.common.backend, "--backend");
      if (spec.mode != oracle::BackendMode::kMock) return spec;
    }
    throw Error(ErrorKind::kInvalidConfig,
                std::string("missing ") + role + " backend: pass " + flag +
                    " (live, replay=DIR or mock=NAME)");
  };
  const auto scorer_spec = role_spec(args.scorer, "--scorer", "logprob scorer");
  const auto embedder_spec =
      role_spec(args.embedder, "--embedder", "embedding");

  oracle::GatewayOptions options;
  options.concurrency = args.common.concurrency;
  options.scorer_model = args.scorer_model;
  options.embedder_model = args.embedder_model;
  options.scorer_window = args.window;

  std::shared_ptr<oracle::OracleGateway> gateway;
  if (scorer_spec.mode == oracle::BackendMode::kReplay ||
      embedder_spec.mode == oracle::BackendMode::kReplay) {
    if (scorer_spec.mode != embedder_spec.mode ||
        scorer_spec.argument != embedder_spec.argument) {
      throw Error(ErrorKind::kInvalidConfig,
                  "replay must serve both the scorer and the embedder from "
                  "one directory");
    }
    gateway = oracle::OracleGateway::replay(scorer_spec.argument, options);
  } else {
    ensure_dir(out_dir);
    options.mode = (scorer_spec.mode == oracle::BackendMode::kLive ||
                    embedder_spec.mode == oracle::BackendMode::kLive)
                       ? oracle::BackendMode::kLive
                       : oracle::BackendMode::kMock;
    options.cache_dir = args.common.cache.empty() ? out_dir / "cache"
                                                  : fs::path(args.common.cache);
    std::shared_ptr<oracle::LogprobBackend> scorer;
    std::shared_ptr<oracle::EmbeddingBackend> embedder;
    if (scorer_spec.mode == oracle::BackendMode::kMock) {
      scorer = oracle::make_mock_scorer(scorer_spec.argument);
    } else {
      const auto endpoint =
          live_endpoint(env, "SCORER_BASE_URL", "SCORER_API_KEY");
      scorer = std::make_shared<oracle::OpenAiLogprobBackend>(
          std::shared_ptr<oracle::HttpTransport>(
              env.make_transport(endpoint.base_url)),
          endpoint.api_key, args.scorer_model);
    }
    if (embedder_spec.mode == oracle::BackendMode::kMock) {
      embedder = oracle::make_mock_embedder(embedder_spec.argument);
    } else {
      const auto endpoint =
          live_endpoint(env, "EMBEDDING_BASE_URL", "EMBEDDING_API_KEY");
      embedder = std::make_shared<oracle::OpenAiEmbeddingBackend>(
          std::shared_ptr<oracle::HttpTransport>(
              env.make_transport(endpoint.base_url)),
          endpoint.api_key, args.embedder_model);
    }
    gateway = std::make_shared<oracle::OracleGateway>(
        options, nullptr, std::move(scorer), std::move(embedder));
  }
  ensure_dir(out_dir);

  ordered_json resolved;
  resolved["command"] = "report";
  resolved["inputs"] = ordered_json::array();
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    resolved["inputs"].push_back(
        {{"path", datasets[i].path.string()}, {"label", labels[i]}});
  }
  resolved["scorer"] = scorer_spec.describe();
  resolved["scorer_model"] = args.scorer_model;
  resolved["embedder"] = embedder_spec.describe();
  resolved["embedder_model"] = args.embedder_model;
  resolved["scorer_window"] = args.window;
  resolved["context_separator"] = metrics::MetricsConfig{}.context_separator;
  resolved["concurrency"] = args.common.concurrency;
  write_json(out_dir / "config.json", resolved);

  metrics::MetricsConfig config;
  config.concurrency = args.common.concurrency;
  std::vector<metrics::MetricsReport> reports;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    reports.push_back(
        metrics::dataset_report(datasets[i], *gateway, labels[i], config));
  }

  ordered_json doc;
  doc["reports"] = ordered_json::array();
  for (const auto& report : reports) doc["reports"].push_back(to_json(report));
  write_json(out_dir / "report.json", doc);
  const auto table = metrics::format_report_table(reports);
  write_file_atomic(out_dir / "report.txt", table);
  *env.out << table;
  return kExitOk;
}

// ---------------------------------------------------------------- judge

struct JudgeArgs {
  CommonOptions common;
  std::string input;
  std::string responses_a;
  std::string responses_b;
  std::string judge_model = "gpt-4";
  int parse_retries = 1;
};

int cmd_judge(const JudgeArgs& args, Environment& env) {
  const fs::path out_dir = args.common.output;
  const auto instructions = read_string_array(args.input);
  const auto outputs_a = read_string_array(args.responses_a);
  const auto outputs_b = read_string_array(args.responses_b);
  if (instructions.size() != outputs_a.size() ||
      instructions.size() != outputs_b.size()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "misaligned inputs: " + std::to_string(instructions.size()) +
                    " instructions, " + std::to_string(outputs_a.size()) +
                    " responses A, " + std::to_string(outputs_b.size()) +
                    " responses B");
  }
  const auto spec = parse_backend(args.common.backend, "--backend");
  ensure_dir(out_dir);
  auto gateway = chat_gateway(env, spec, args.common, out_dir / "cache");

  judge::JudgeConfig config;
  config.judge_model = args.judge_model;
  config.parse_retries = args.parse_retries;
  config.concurrency = args.common.concurrency;

  ordered_json resolved;
  resolved["command"] = "judge";
  resolved["input"] = args.input;
  resolved["responses_a"] = args.responses_a;
  resolved["responses_b"] = args.responses_b;
  resolved["backend"] = spec.describe();
  resolved["judge_model"] = config.judge_model;
  resolved["temperature"] = config.temperature;
  resolved["max_tokens"] = config.max_tokens;
  resolved["parse_retries"] = config.parse_retries;
  resolved["concurrency"] = config.concurrency;
  write_json(out_dir / "config.json", resolved);

  const auto result = judge::run_comparison(*gateway, instructions, outputs_a,
                                            outputs_b, config, env.stop);
  write_json(out_dir / "tally.json", judge::to_json(result));
  *env.out << judge::summary_line(result) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const std::string& input, const std::string& format,
                 Environment& env) {
  const auto file = load_dataset(input, parse_format(format));
  if (file.format == DatasetFormat::kRecycledJson) {
    for (std::size_t i = 0; i < file.records.size(); ++i) {
      const auto& meta = file.records[i].meta;
      if (auto it = meta.find("status");
          it != meta.end() && !recycle_status_from_string(it->second)) {
        throw Error(ErrorKind::kSchemaViolation,
                    input + ": entry " + std::to_string(i) +
                        ": unknown meta.status `" + it->second + "`");
      }
    }
  }
  *env.out << "valid: " << file.records.size() << " records, "
           << duplicate_count(file) << " duplicates (" << to_string(file.format)
           << ", source " << to_string(file.records.front().source) << ")\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& common, bool needs_output) {
  cmd->add_option("--backend", common.backend,
                  "live | replay=DIR | mock=NAME");
  cmd->add_option("--concurrency", common.concurrency, "worker count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--cache", common.cache,
                  "response cache directory (default OUTPUT/cache)");
  auto* output = cmd->add_option("--output", common.output, "output directory");
  if (needs_output) output->required();
}

}  // namespace

Environment Environment::process() {
  Environment env;
  env.getenv = [](const std::string& name) -> std::optional<std::string> {
    const char* value = std::getenv(name.c_str());
    if (value == nullptr) return std::nullopt;
    return std::string(value);
  };
  env.make_transport = [](const std::string& base_url) {
    return oracle::make_http_transport(base_url);
  };
  env.out = &std::cout;
  env.err = &std::cerr;
  return env;
}

int run(const std::vector<std::string>& args, Environment& env) {
  std::ostringstream null_stream;
  if (env.out == nullptr) env.out = &null_stream;
  if (env.err == nullptr) env.err = &null_stream;

  CLI::App app{"Recycle instruction-tuning data with an oracle model, report "
               "dataset quality metrics, and run dual-order pairwise judging."};
  app.name("recycle");
  app.require_subcommand(1);

  RecycleArgs recycle_args;
  auto* recycle_cmd = app.add_subcommand("recycle", "rewrite a dataset");
  add_common(recycle_cmd, recycle_args.common, true);
  recycle_cmd->add_option("--input", recycle_args.input, "dataset to recycle")
      ->required();
  recycle_cmd->add_option("--format", recycle_args.format, "input format")
      ->check(CLI::IsMember({"alpaca", "recycled"}));
  recycle_cmd->add_option("--criteria", recycle_args.criteria,
                          "criteria JSON file");
  recycle_cmd->add_option("--phases", recycle_args.phases)
      ->check(CLI::IsMember({"both", "instruction-only"}));
  recycle_cmd->add_option("--parse-retries", recycle_args.parse_retries)
      ->check(CLI::NonNegativeNumber);
  recycle_cmd->add_flag("--resume", recycle_args.resume,
                        "reuse OUTPUT/checkpoint.jsonl");
  recycle_cmd->add_option("--oracle-model", recycle_args.oracle_model);
  recycle_cmd->add_option("--temperature", recycle_args.temperature)
      ->check(CLI::NonNegativeNumber);
  recycle_cmd->add_option("--max-tokens", recycle_args.max_tokens)
      ->check(CLI::PositiveNumber);
  recycle_cmd->add_option("--seed", recycle_args.seed);

  ReportArgs report_args;
  auto* report_cmd =
      app.add_subcommand("report", "dataset quality metrics table");
  add_common(report_cmd, report_args.common, true);
  report_cmd->add_option("--input", report_args.input)->required();
  report_cmd->add_option("--compare", report_args.compare,
                         "second dataset shown side by side");
  report_cmd->add_option("--format", report_args.format)
      ->check(CLI::IsMember({"alpaca", "recycled"}));
  report_cmd->add_option("--compare-format", report_args.compare_format)
      ->check(CLI::IsMember({"alpaca", "recycled"}));
  report_cmd->add_option("--label", report_args.label);
  report_cmd->add_option("--compare-label", report_args.compare_label);
  report_cmd->add_option("--scorer", report_args.scorer,
                         "live | replay=DIR | mock=unigram");
  report_cmd->add_option("--embedder", report_args.embedder,
                         "live | replay=DIR | mock=letters");
  report_cmd->add_option("--scorer-model", report_args.scorer_model);
  report_cmd->add_option("--embedder-model", report_args.embedder_model);
  report_cmd->add_option("--window", report_args.window,
                         "max scored tokens per continuation");

  JudgeArgs judge_args;
  auto* judge_cmd =
      app.add_subcommand("judge", "dual-order pairwise comparison");
  add_common(judge_cmd, judge_args.common, true);
  judge_cmd->add_option("--input", judge_args.input,
                        "JSON array of test instructions")
      ->required();
  judge_cmd->add_option("--responses-a", judge_args.responses_a)->required();
  judge_cmd->add_option("--responses-b", judge_args.responses_b)->required();
  judge_cmd->add_option("--judge-model", judge_args.judge_model);
  judge_cmd->add_option("--parse-retries", judge_args.parse_retries)
      ->check(CLI::NonNegativeNumber);

  std::string validate_input;
  std::string validate_format = "alpaca";
  auto* validate_cmd = app.add_subcommand("validate", "schema-check a dataset");
  validate_cmd->add_option("--input", validate_input)->required();
  validate_cmd->add_option("--format", validate_format)
      ->check(CLI::IsMember({"alpaca", "recycled"}));

  std::vector<const char*> argv;
  argv.push_back("recycle");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, *env.out, *env.err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string output_dir;
  try {
    if (recycle_cmd->parsed()) {
      output_dir = recycle_args.common.output;
      return cmd_recycle(recycle_args, env);
    }
    if (report_cmd->parsed()) {
      output_dir = report_args.common.output;
      return cmd_report(report_args, env,
                        report_cmd->count("--backend") > 0);
    }
    if (judge_cmd->parsed()) {
      output_dir = judge_args.common.output;
      return cmd_judge(judge_args, env);
    }
    return cmd_validate(validate_input, validate_format, env);
  } catch (const Error& error) {
    return fail(env, error, output_dir);
  } catch (const std::exception& error) {
    return fail(env, Error(ErrorKind::kIoFailure, error.what()), output_dir);
  }
}

}  // namespace recycle::cli
