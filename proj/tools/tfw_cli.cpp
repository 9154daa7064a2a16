// tfw: command-line front end for running and scoring Think-from-Words
// prompting experiments.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "tfw/backend.hpp"
#include "tfw/corpus.hpp"
#include "tfw/error.hpp"
#include "tfw/hash.hpp"
#include "tfw/runner.hpp"

namespace {

const tfw::SchemaRegistry& registry_for(const std::string& path, std::optional<tfw::SchemaRegistry>& storage) {
  if (path.empty()) return tfw::SchemaRegistry::builtin();
  storage = tfw::SchemaRegistry::from_file(path);
  return *storage;
}

struct RunArgs {
  std::string config;
  std::string mode;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> datasets;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> parallelism;
  std::string output_dir;
  std::string format = "table";
  bool quiet = false;
};

int cmd_run(const RunArgs& args) {
  tfw::ExperimentConfig config = tfw::ExperimentConfig::from_file(args.config);
  if (!args.mode.empty()) config.mode = tfw::parse_run_mode(args.mode);
  if (!args.strategies.empty()) {
    config.strategies.clear();
    for (const auto& s : args.strategies) config.strategies.push_back(tfw::parse_strategy(s));
  }
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (!args.datasets.empty()) {
    std::vector<tfw::DatasetSpec> kept;
    for (const auto& dataset : config.datasets) {
      for (const auto& wanted : args.datasets) {
        if (dataset.name == wanted || tfw::to_string(dataset.task) == wanted) {
          kept.push_back(dataset);
          break;
        }
      }
    }
    if (kept.empty()) throw tfw::ConfigError("--dataset matched no configured dataset");
    config.datasets = std::move(kept);
  }
  if (args.parallelism) config.parallelism = *args.parallelism;
  if (!args.output_dir.empty()) config.output_dir = std::filesystem::absolute(args.output_dir).string();
  config.validate();

  tfw::RunOptions options;
  options.limit = args.limit;
  if (!args.quiet) options.progress = [](std::string_view message) { std::cerr << message << '\n'; };
  const tfw::RunReport report = tfw::run_experiment(config, options);
  if (!report.complete) {
    std::cerr << "stopped with " << report.pending << " request(s) pending; rerun to resume\n";
    return 0;
  }
  std::cout << tfw::emit_report(report, tfw::parse_report_format(args.format));
  return 0;
}

int cmd_score(const std::string& transcripts, const std::string& schemas, const std::string& format, bool empty_gold_ls) {
  std::optional<tfw::SchemaRegistry> storage;
  tfw::ScoreOptions options;
  options.empty_gold_ls_one = empty_gold_ls;
  const auto report = tfw::rescore_transcripts(transcripts, registry_for(schemas, storage), options);
  std::cout << tfw::emit_report(report, tfw::parse_report_format(format));
  return 0;
}

int cmd_replay_verify(const std::string& cassette_path, const std::string& config_path) {
  std::ifstream in(cassette_path, std::ios::binary);
  if (!in) throw tfw::Error("cannot open cassette " + cassette_path);
  const auto entries = tfw::Cassette::read_entries(in);
  std::set<std::string> fingerprints;
  for (const auto& entry : entries) fingerprints.insert(entry.fingerprint);
  std::cout << "cassette: " << cassette_path << '\n'
            << "entries: " << entries.size() << '\n'
            << "sha256: " << tfw::sha256_file(cassette_path) << '\n';
  if (!entries.empty()) std::cout << "model: " << entries.front().model << '\n';
  if (config_path.empty()) return 0;

  const auto config = tfw::ExperimentConfig::from_file(config_path);
  const auto planned = tfw::planned_fingerprints(config);
  std::size_t missing = 0;
  for (const auto& fingerprint : planned) {
    if (!fingerprints.contains(fingerprint)) {
      if (missing < 5) std::cout << "missing: " << fingerprint << '\n';
      ++missing;
    }
  }
  std::cout << "planned requests: " << planned.size() << ", missing: " << missing << '\n';
  return missing == 0 ? 0 : 1;
}

int cmd_gen_fixtures(const std::string& task, std::size_t n, std::uint64_t seed, const std::string& out_path,
                     const std::string& schemas) {
  std::optional<tfw::SchemaRegistry> storage;
  const auto& schema = registry_for(schemas, storage).get(tfw::parse_task_id(task));
  const auto samples = tfw::gen_fixtures(schema, n, seed);
  if (out_path.empty()) {
    tfw::write_corpus(std::cout, samples);
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw tfw::Error("cannot write " + out_path);
  tfw::write_corpus(out, samples);
  return 0;
}

int cmd_plan(const std::string& corpus, const std::string& task, std::uint64_t seed, const std::string& count,
             const std::vector<std::string>& exemplars, const std::string& schemas) {
  std::optional<tfw::SchemaRegistry> storage;
  const auto& schema = registry_for(schemas, storage).get(tfw::parse_task_id(task));
  const auto samples = tfw::load_corpus(corpus, schema);
  const std::size_t n = count == "all" ? tfw::kAllSamples : static_cast<std::size_t>(std::stoull(count));
  std::cout << tfw::draw_plan(samples, schema, seed, n, exemplars).to_json() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Think-from-Words prompting harness"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", run_args.config, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", run_args.mode, "live, record or replay (overrides the config)");
  run->add_option("--strategy", run_args.strategies, "Restrict to strategy (repeatable)");
  run->add_option("--seed", run_args.seeds, "Override seeds (repeatable)");
  run->add_option("--dataset", run_args.datasets, "Restrict to dataset name or task id (repeatable)");
  run->add_option("--limit", run_args.limit, "Stop after N new requests (resume later)");
  run->add_option("--parallelism", run_args.parallelism, "Concurrent requests");
  run->add_option("--output-dir", run_args.output_dir, "Override output directory");
  run->add_option("--format", run_args.format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
  run->add_flag("--quiet", run_args.quiet, "No progress output");

  std::string transcripts, score_schemas, score_format = "table";
  bool empty_gold_ls = false;
  auto* score = app.add_subcommand("score", "Re-score persisted transcripts offline");
  score->add_option("--transcripts", transcripts, "Transcript directory")->required()->check(CLI::ExistingDirectory);
  score->add_option("--schemas", score_schemas, "Schema registry file");
  score->add_option("--format", score_format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
  score->add_flag("--empty-gold-ls", empty_gold_ls, "Score LS as 1 when a sample has no gold pairs");

  std::string cassette, verify_config;
  auto* verify = app.add_subcommand("replay-verify", "Validate a cassette (and its coverage of a config)");
  verify->add_option("--cassette", cassette, "Cassette JSONL")->required()->check(CLI::ExistingFile);
  verify->add_option("--config", verify_config, "Check that every request of this config is recorded");

  std::string task, fixtures_out, fixtures_schemas;
  std::size_t n = 0;
  std::uint64_t fixture_seed = 42;
  auto* gen = app.add_subcommand("gen-fixtures", "Write a synthetic corpus as JSONL");
  gen->add_option("--task", task, "Task id (SCNM, SCPOS_RW, ..., TCREE)")->required();
  gen->add_option("--n", n, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", fixture_seed, "Generator seed");
  gen->add_option("--out", fixtures_out, "Output file (default stdout)");
  gen->add_option("--schemas", fixtures_schemas, "Schema registry file");

  std::string plan_corpus, plan_task, plan_count = "1000", plan_schemas;
  std::uint64_t plan_seed = 42;
  std::vector<std::string> plan_exemplars;
  auto* plan = app.add_subcommand("plan", "Print the seeded sample plan for a corpus");
  plan->add_option("--corpus", plan_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  plan->add_option("--task", plan_task, "Task id")->required();
  plan->add_option("--seed", plan_seed, "Seed");
  plan->add_option("--count", plan_count, "Number of test samples or 'all'");
  plan->add_option("--exemplar-id", plan_exemplars, "Fix exemplar ids (repeatable)");
  plan->add_option("--schemas", plan_schemas, "Schema registry file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_args);
    if (*score) return cmd_score(transcripts, score_schemas, score_format, empty_gold_ls);
    if (*verify) return cmd_replay_verify(cassette, verify_config);
    if (*gen) return cmd_gen_fixtures(task, n, fixture_seed, fixtures_out, fixtures_schemas);
    if (*plan) return cmd_plan(plan_corpus, plan_task, plan_seed, plan_count, plan_exemplars, plan_schemas);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
