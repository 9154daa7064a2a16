#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tfw/backend.hpp"
#include "tfw/corpus.hpp"
#include "tfw/metrics.hpp"
#include "tfw/promptgen.hpp"

namespace tfw {

enum class RunMode { kLive, kRecord, kReplay };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

enum class PlanPolicy {
  kShared,   ///< one plan drawn with seeds[0], reused by every seed
  kPerSeed,  ///< a fresh plan per seed
};

struct DatasetSpec {
  std::string name;  ///< report column; defaults to the schema display name
  TaskId task = TaskId::kScnm;
  std::string corpus;  ///< relative paths resolve against the config file
  std::optional<std::size_t> sample_count;  ///< kAllSamples for `all`
  std::vector<std::string> exemplar_ids;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<Strategy> strategies{Strategy::kBaselineIclIl, Strategy::kTfw, Strategy::kTfwExtra};
  std::vector<std::uint64_t> seeds{42, 123123, 678910};
  std::size_t sample_count = 1000;
  BackendConfig backend;
  RunMode mode = RunMode::kReplay;
  std::string cassette;
  std::size_t parallelism = 1;
  std::string output_dir = "out";
  std::string language = "en";
  std::string templates;  ///< directory; empty uses the built-in set
  std::string schemas;    ///< registry file; empty uses the built-in one
  PlanPolicy plan_policy = PlanPolicy::kShared;
  ChatLayout chat_layout = ChatLayout::kSingleUser;
  std::string separator = "\n\n";
  bool send_seed = true;
  ScoreOptions scoring;
  std::filesystem::path base_dir;

  static ExperimentConfig from_yaml(std::string_view yaml, const std::filesystem::path& base_dir = {});
  static ExperimentConfig from_file(const std::filesystem::path& path);

  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;

  /// Fields that define the experiment's results. Execution details
  /// (parallelism, output_dir, mode) are left out so they cannot perturb reports.
  nlohmann::json snapshot() const;
};

struct RunOptions {
  /// Stop after this many new cells; the run can be resumed later.
  std::optional<std::size_t> limit;
  /// Replaces the HTTP client as the live/record upstream.
  Backend* upstream = nullptr;
  WarningSink warn = warn_to_stderr;
  std::function<void(std::string_view)> progress;
};

struct ReportCell {
  std::string dataset;
  TaskId task = TaskId::kScnm;
  Strategy strategy = Strategy::kTfw;
  AggregateScore score;
  std::size_t failures = 0;

  bool pairs_scored() const { return scores_pairs(strategy); }
};

struct RunReport {
  std::vector<std::string> datasets;
  std::vector<Strategy> strategies;
  std::vector<ReportCell> cells;
  nlohmann::json provenance = nlohmann::json::object();
  bool complete = true;
  std::size_t pending = 0;

  const ReportCell* find(std::string_view dataset, Strategy strategy) const;
};

/// One line of a transcript JSONL file.
struct TranscriptRecord {
  std::string sample_id;
  std::string dataset;
  TaskId task = TaskId::kScnm;
  Strategy strategy = Strategy::kTfw;
  std::uint64_t seed = 0;
  std::string fingerprint;
  ParsedAnswer parsed;
  std::string gold_text_label;
  std::vector<LabelSpanPair> gold_pairs;
  SampleScore score;
  bool failed = false;
  int attempts = 0;
  std::int64_t latency_ms = 0;

  nlohmann::json to_json() const;
  static TranscriptRecord from_json(const nlohmann::json& j);
};

/// Transcripts live at `<output_dir>/transcripts/<dataset>/<strategy>/seed-<seed>.jsonl`.
std::filesystem::path transcript_path(const std::filesystem::path& output_dir, std::string_view dataset,
                                      Strategy strategy, std::uint64_t seed);

/// Loads corpora and templates, draws plans, sends every pending cell to the
/// backend, persists one transcript line per cell and, once every cell is done,
/// writes report.txt, report.csv and report.json to the output directory.
///
/// Cells already present in the transcripts are skipped (failed ones are
/// retried). Results are keyed by sample id, so parallelism and arrival order do
/// not affect the report. Throws on validation failures and replay misses;
/// transport failures are recorded as failed cells scored (0, 0, 0).
RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Fingerprints of every cell the config would send, for replay pre-flight.
std::vector<std::string> planned_fingerprints(const ExperimentConfig& config);

enum class ReportFormat { kTable, kCsv, kJson };

ReportFormat parse_report_format(std::string_view name);

std::string emit_report(const RunReport& report, ReportFormat format);

struct CsvRow {
  std::string dataset;
  std::string strategy;
  double tc = 0.0;
  std::optional<double> ls;
  std::optional<double> total;
  std::size_t n_samples = 0;
  std::size_t n_runs = 0;
};

std::vector<CsvRow> parse_report_csv(std::string_view csv);

/// Re-parses and re-scores every transcript under `dir` without the network and
/// aggregates per (dataset, strategy) with seeds as runs.
RunReport rescore_transcripts(const std::filesystem::path& dir, const SchemaRegistry& schemas,
                              const ScoreOptions& options = {});

}  // namespace tfw
