#include "tfw/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include "tfw/error.hpp"
#include "tfw/hash.hpp"
#include "tfw/text.hpp"

namespace tfw {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kLive:
      return "live";
    case RunMode::kRecord:
      return "record";
    case RunMode::kReplay:
      return "replay";
  }
  return "replay";
}

RunMode parse_run_mode(std::string_view name) {
  if (text::iequals(name, "live")) return RunMode::kLive;
  if (text::iequals(name, "record")) return RunMode::kRecord;
  if (text::iequals(name, "replay")) return RunMode::kReplay;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected live, record or replay)");
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::size_t parse_count(const YAML::Node& node, std::string_view field) {
  const auto value = node.as<std::string>();
  if (text::iequals(value, "all")) return kAllSamples;
  try {
    const long long count = node.as<long long>();
    if (count <= 0) throw ConfigError(std::string(field) + " must be positive or 'all'");
    return static_cast<std::size_t>(count);
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string(field) + " must be a positive integer or 'all'");
  }
}

json count_json(std::size_t count) { return count == kAllSamples ? json("all") : json(count); }

void reject_unknown(const YAML::Node& node, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& entry : node) {
    const auto key = entry.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

BackendConfig parse_backend(const YAML::Node& node) {
  BackendConfig backend;
  if (!node) return backend;
  reject_unknown(node,
                 {"endpoint_url", "model", "temperature", "max_tokens", "timeout_ms", "max_retries", "api_key_env",
                  "requests_per_minute", "backoff_initial_ms", "backoff_max_ms"},
                 "backend");
  if (node["endpoint_url"]) backend.endpoint_url = node["endpoint_url"].as<std::string>();
  if (node["model"]) backend.model_name = node["model"].as<std::string>();
  if (node["temperature"]) backend.temperature = node["temperature"].as<double>();
  if (node["max_tokens"]) backend.max_tokens = node["max_tokens"].as<int>();
  if (node["timeout_ms"]) backend.timeout = std::chrono::milliseconds(node["timeout_ms"].as<long long>());
  if (node["max_retries"]) backend.max_retries = node["max_retries"].as<int>();
  if (node["api_key_env"]) backend.api_key_env = node["api_key_env"].as<std::string>();
  if (node["requests_per_minute"]) backend.requests_per_minute = node["requests_per_minute"].as<double>();
  if (node["backoff_initial_ms"]) {
    backend.backoff_initial = std::chrono::milliseconds(node["backoff_initial_ms"].as<long long>());
  }
  if (node["backoff_max_ms"]) backend.backoff_max = std::chrono::milliseconds(node["backoff_max_ms"].as<long long>());
  return backend;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_yaml(std::string_view yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ParseError("config: " + std::string(e.what()), e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a key/value document");

  ExperimentConfig config;
  config.base_dir = base_dir;
  try {
    reject_unknown(root,
                   {"datasets", "strategies", "seeds", "sample_count", "backend", "mode", "cassette", "parallelism",
                    "output_dir", "language", "templates", "schemas", "plan_policy", "chat_layout", "separator",
                    "send_seed", "empty_gold_ls"},
                   "config");
    const YAML::Node datasets = root["datasets"];
    if (!datasets || !datasets.IsSequence()) throw ConfigError("config: 'datasets' must be a list");
    for (const auto& node : datasets) {
      reject_unknown(node, {"task", "corpus", "name", "sample_count", "exemplar_ids"}, "dataset");
      DatasetSpec dataset;
      if (!node["task"] || !node["corpus"]) throw ConfigError("dataset entries need 'task' and 'corpus'");
      dataset.task = parse_task_id(node["task"].as<std::string>());
      dataset.corpus = node["corpus"].as<std::string>();
      if (node["name"]) dataset.name = node["name"].as<std::string>();
      if (node["sample_count"]) dataset.sample_count = parse_count(node["sample_count"], "dataset sample_count");
      if (node["exemplar_ids"]) dataset.exemplar_ids = node["exemplar_ids"].as<std::vector<std::string>>();
      config.datasets.push_back(std::move(dataset));
    }
    if (root["strategies"]) {
      config.strategies.clear();
      for (const auto& node : root["strategies"]) config.strategies.push_back(parse_strategy(node.as<std::string>()));
    }
    if (root["seeds"]) config.seeds = root["seeds"].as<std::vector<std::uint64_t>>();
    if (root["sample_count"]) config.sample_count = parse_count(root["sample_count"], "sample_count");
    config.backend = parse_backend(root["backend"]);
    if (root["mode"]) config.mode = parse_run_mode(root["mode"].as<std::string>());
    if (root["cassette"]) config.cassette = root["cassette"].as<std::string>();
    if (root["parallelism"]) {
      const long long parallelism = root["parallelism"].as<long long>();
      if (parallelism <= 0) throw ConfigError("parallelism must be positive");
      config.parallelism = static_cast<std::size_t>(parallelism);
    }
    if (root["output_dir"]) config.output_dir = root["output_dir"].as<std::string>();
    if (root["language"]) config.language = root["language"].as<std::string>();
    if (root["templates"]) config.templates = root["templates"].as<std::string>();
    if (root["schemas"]) config.schemas = root["schemas"].as<std::string>();
    if (root["plan_policy"]) {
      const auto policy = root["plan_policy"].as<std::string>();
      if (text::iequals(policy, "shared")) {
        config.plan_policy = PlanPolicy::kShared;
      } else if (text::iequals(policy, "per_seed")) {
        config.plan_policy = PlanPolicy::kPerSeed;
      } else {
        throw ConfigError("plan_policy must be 'shared' or 'per_seed'");
      }
    }
    if (root["chat_layout"]) config.chat_layout = parse_chat_layout(root["chat_layout"].as<std::string>());
    if (root["separator"]) config.separator = root["separator"].as<std::string>();
    if (root["send_seed"]) config.send_seed = root["send_seed"].as<bool>();
    if (root["empty_gold_ls"]) config.scoring.empty_gold_ls_one = root["empty_gold_ls"].as<int>() == 1;
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  config.validate();
  return config;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_yaml(buffer.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("config: no datasets");
  if (strategies.empty()) throw ConfigError("config: no strategies");
  if (seeds.empty()) throw ConfigError("config: no seeds");
  if (sample_count == 0) throw ConfigError("config: sample_count must be positive");
  if (parallelism == 0) throw ConfigError("config: parallelism must be positive");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("config: seeds must be distinct");
  }
  if (std::set<Strategy>(strategies.begin(), strategies.end()).size() != strategies.size()) {
    throw ConfigError("config: strategies must be distinct");
  }
  std::set<std::string> names;
  for (const auto& dataset : datasets) {
    if (dataset.corpus.empty()) throw ConfigError("config: dataset without corpus path");
    const std::string name = dataset.name.empty() ? std::string(to_string(dataset.task)) : dataset.name;
    if (!names.insert(name).second) throw ConfigError("config: duplicate dataset '" + name + "'");
  }
  if (mode != RunMode::kLive && cassette.empty()) {
    throw ConfigError("config: mode " + std::string(to_string(mode)) + " needs a cassette path");
  }
  backend.validate();
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

json ExperimentConfig::snapshot() const {
  json datasets_json = json::array();
  for (const auto& dataset : datasets) {
    json entry = {{"task", to_string(dataset.task)}, {"corpus", dataset.corpus}};
    if (!dataset.name.empty()) entry["name"] = dataset.name;
    if (dataset.sample_count) entry["sample_count"] = count_json(*dataset.sample_count);
    if (!dataset.exemplar_ids.empty()) entry["exemplar_ids"] = dataset.exemplar_ids;
    datasets_json.push_back(std::move(entry));
  }
  json strategies_json = json::array();
  for (auto strategy : strategies) strategies_json.push_back(to_string(strategy));
  return {{"datasets", datasets_json},
          {"strategies", strategies_json},
          {"seeds", seeds},
          {"sample_count", count_json(sample_count)},
          {"language", language},
          {"templates", templates},
          {"schemas", schemas},
          {"plan_policy", plan_policy == PlanPolicy::kShared ? "shared" : "per_seed"},
          {"chat_layout", chat_layout == ChatLayout::kSingleUser ? "single" : "turns"},
          {"separator", separator},
          {"send_seed", send_seed},
          {"empty_gold_ls", scoring.empty_gold_ls_one ? 1 : 0},
          {"backend",
           {{"endpoint_url", backend.endpoint_url},
            {"model", backend.model_name},
            {"temperature", backend.temperature},
            {"max_tokens", backend.max_tokens}}}};
}

// ---------------------------------------------------------------------------
// Transcripts

json TranscriptRecord::to_json() const {
  auto pairs_json = [](const std::vector<LabelSpanPair>& pairs) {
    json out = json::array();
    for (const auto& pair : pairs) out.push_back({{"label", pair.label}, {"span", pair.span}});
    return out;
  };
  return {{"sample_id", sample_id},
          {"dataset", dataset},
          {"task", to_string(task)},
          {"strategy", to_string(strategy)},
          {"seed", seed},
          {"fingerprint", fingerprint},
          {"raw", parsed.raw},
          {"text_label", parsed.text_label ? json(*parsed.text_label) : json()},
          {"pairs", pairs_json(parsed.pairs)},
          {"diagnostics", parsed.diagnostics},
          {"gold_text_label", gold_text_label},
          {"gold_pairs", pairs_json(gold_pairs)},
          {"tc", score.tc},
          {"ls", score.ls},
          {"total", score.total},
          {"failed", failed},
          {"attempts", attempts},
          {"latency_ms", latency_ms}};
}

TranscriptRecord TranscriptRecord::from_json(const json& j) {
  auto read_pairs = [](const json& array) {
    std::vector<LabelSpanPair> pairs;
    for (const auto& pair : array) pairs.push_back({pair.at("label").get<std::string>(), pair.at("span").get<std::string>()});
    return pairs;
  };
  TranscriptRecord record;
  try {
    record.sample_id = j.at("sample_id").get<std::string>();
    record.dataset = j.at("dataset").get<std::string>();
    record.task = parse_task_id(j.at("task").get<std::string>());
    record.strategy = parse_strategy(j.at("strategy").get<std::string>());
    record.seed = j.at("seed").get<std::uint64_t>();
    record.fingerprint = j.at("fingerprint").get<std::string>();
    record.parsed.raw = j.at("raw").get<std::string>();
    if (!j.at("text_label").is_null()) record.parsed.text_label = j.at("text_label").get<std::string>();
    record.parsed.pairs = read_pairs(j.at("pairs"));
    record.parsed.diagnostics = j.value("diagnostics", std::vector<std::string>{});
    record.gold_text_label = j.at("gold_text_label").get<std::string>();
    record.gold_pairs = read_pairs(j.at("gold_pairs"));
    record.score = {j.at("tc").get<double>(), j.at("ls").get<double>(), j.at("total").get<double>()};
    record.failed = j.value("failed", false);
    record.attempts = j.value("attempts", 0);
    record.latency_ms = j.value("latency_ms", std::int64_t{0});
  } catch (const json::exception& e) {
    throw ParseError(std::string("transcript record: ") + e.what());
  }
  return record;
}

namespace {

std::string path_component(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += safe ? c : '_';
  }
  return out.empty() ? "_" : out;
}

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> records;
  std::ifstream in(path, std::ios::binary);
  if (!in) return records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json object = json::parse(line, nullptr, false);
    if (object.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn tail from an interrupted run
      throw ParseError("transcript " + path.string() + ": malformed JSON", line_number);
    }
    records.push_back(TranscriptRecord::from_json(object));
  }
  return records;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error("cannot write " + temp);
  }
  std::filesystem::rename(temp, path);
}

}  // namespace

std::filesystem::path transcript_path(const std::filesystem::path& output_dir, std::string_view dataset,
                                      Strategy strategy, std::uint64_t seed) {
  std::string strategy_dir(to_string(strategy));
  std::transform(strategy_dir.begin(), strategy_dir.end(), strategy_dir.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return output_dir / "transcripts" / path_component(dataset) / strategy_dir /
         ("seed-" + std::to_string(seed) + ".jsonl");
}

const ReportCell* RunReport::find(std::string_view dataset, Strategy strategy) const {
  for (const auto& cell : cells) {
    if (cell.dataset == dataset && cell.strategy == strategy) return &cell;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Experiment preparation

namespace {

struct LoadedDataset {
  DatasetSpec spec;
  std::string name;
  const TaskSchema* schema = nullptr;
  std::vector<MixedSample> samples;
  std::unordered_map<std::string, std::size_t> index;
  std::map<std::uint64_t, SamplePlan> plans;
  std::map<Strategy, PromptTemplate> templates;
  std::string corpus_sha256;

  const MixedSample& sample(const std::string& id) const { return samples[index.at(id)]; }
};

struct Cell {
  std::size_t group = 0;
  const MixedSample* sample = nullptr;
  ChatRequest request;
  std::string fingerprint;
};

struct Group {
  std::size_t dataset = 0;
  Strategy strategy = Strategy::kTfw;
  std::uint64_t seed = 0;
  std::filesystem::path path;
  std::vector<std::size_t> cells;  // indices into Prepared::cells, plan order
};

struct Prepared {
  SchemaRegistry registry;
  std::vector<LoadedDataset> datasets;
  std::vector<Group> groups;
  std::vector<Cell> cells;
};

Prepared prepare(const ExperimentConfig& config, const WarningSink& warn) {
  config.validate();
  Prepared prepared;
  prepared.registry =
      config.schemas.empty() ? SchemaRegistry::builtin() : SchemaRegistry::from_file(config.resolve(config.schemas));
  const TemplateLibrary library = config.templates.empty() ? TemplateLibrary()
                                                           : TemplateLibrary(config.resolve(config.templates));
  const std::filesystem::path output_dir = config.resolve(config.output_dir);

  for (const auto& spec : config.datasets) {
    LoadedDataset dataset;
    dataset.spec = spec;
    dataset.schema = &prepared.registry.get(spec.task);
    dataset.name = spec.name.empty() ? dataset.schema->display_name : spec.name;
    const auto corpus_path = config.resolve(spec.corpus);
    dataset.samples = load_corpus(corpus_path, *dataset.schema, warn);
    dataset.corpus_sha256 = sha256_file(corpus_path);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) dataset.index.emplace(dataset.samples[i].id, i);

    const std::size_t count = spec.sample_count.value_or(config.sample_count);
    if (config.plan_policy == PlanPolicy::kShared) {
      const SamplePlan plan = draw_plan(dataset.samples, *dataset.schema, config.seeds.front(), count, spec.exemplar_ids);
      for (auto seed : config.seeds) dataset.plans.emplace(seed, plan);
    } else {
      for (auto seed : config.seeds) {
        dataset.plans.emplace(seed, draw_plan(dataset.samples, *dataset.schema, seed, count, spec.exemplar_ids));
      }
    }
    for (auto strategy : config.strategies) {
      dataset.templates.emplace(strategy, library.load(config.language, spec.task, strategy));
    }
    prepared.datasets.push_back(std::move(dataset));
  }

  // Cells are ordered dataset, strategy (canonical order), seed (config order), plan order.
  std::vector<Strategy> strategies = config.strategies;
  std::sort(strategies.begin(), strategies.end());
  const PromptOptions prompt_options{config.separator};
  for (std::size_t d = 0; d < prepared.datasets.size(); ++d) {
    const auto& dataset = prepared.datasets[d];
    for (auto strategy : strategies) {
      const PromptTemplate& tmpl = dataset.templates.at(strategy);
      for (auto seed : config.seeds) {
        const SamplePlan& plan = dataset.plans.at(seed);
        std::vector<MixedSample> exemplars;
        for (const auto& id : plan.exemplar_ids) exemplars.push_back(dataset.sample(id));

        Group group;
        group.dataset = d;
        group.strategy = strategy;
        group.seed = seed;
        group.path = transcript_path(output_dir, dataset.name, strategy, seed);
        for (const auto& id : plan.drawn_ids) {
          const MixedSample& target = dataset.sample(id);
          const PromptBundle bundle = build_prompt(strategy, tmpl, *dataset.schema, exemplars, target, prompt_options);
          Cell cell;
          cell.group = prepared.groups.size();
          cell.sample = &target;
          cell.request.messages = bundle.messages(config.chat_layout);
          if (config.send_seed) cell.request.seed = static_cast<std::int64_t>(seed);
          cell.fingerprint = request_fingerprint(config.backend, cell.request);
          group.cells.push_back(prepared.cells.size());
          prepared.cells.push_back(std::move(cell));
        }
        prepared.groups.push_back(std::move(group));
      }
    }
  }
  return prepared;
}

TranscriptRecord make_record(const Prepared& prepared, const Cell& cell) {
  const Group& group = prepared.groups[cell.group];
  const LoadedDataset& dataset = prepared.datasets[group.dataset];
  TranscriptRecord record;
  record.sample_id = cell.sample->id;
  record.dataset = dataset.name;
  record.task = dataset.schema->task;
  record.strategy = group.strategy;
  record.seed = group.seed;
  record.fingerprint = cell.fingerprint;
  record.gold_text_label = cell.sample->text_label;
  record.gold_pairs = cell.sample->gold_pairs;
  return record;
}

AggregateScore aggregate_group_runs(const std::vector<std::vector<const TranscriptRecord*>>& runs) {
  std::vector<std::map<std::string, SampleScore>> keyed;
  std::vector<std::vector<SampleScore>> ordered;
  for (const auto& run : runs) {
    std::map<std::string, SampleScore> scores;
    std::vector<SampleScore> list;
    for (const auto* record : run) {
      scores.emplace(record->sample_id, record->score);
      list.push_back(record->score);
    }
    keyed.push_back(std::move(scores));
    ordered.push_back(std::move(list));
  }
  try {
    return aggregate(keyed);
  } catch (const std::invalid_argument&) {
    return aggregate_unpaired(ordered);
  }
}

}  // namespace

std::vector<std::string> planned_fingerprints(const ExperimentConfig& config) {
  const Prepared prepared = prepare(config, nullptr);
  std::vector<std::string> fingerprints;
  fingerprints.reserve(prepared.cells.size());
  for (const auto& cell : prepared.cells) fingerprints.push_back(cell.fingerprint);
  return fingerprints;
}

// ---------------------------------------------------------------------------
// Execution

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const Prepared prepared = prepare(config, options.warn);
  const std::filesystem::path output_dir = config.resolve(config.output_dir);

  std::optional<Cassette> cassette;
  std::unique_ptr<HttpBackend> http;
  Backend* upstream = options.upstream;
  if (!upstream && config.mode != RunMode::kReplay) {
    http = std::make_unique<HttpBackend>();
    upstream = http.get();
  }
  std::unique_ptr<CassetteBackend> cassette_backend;
  Backend* backend = upstream;
  if (config.mode != RunMode::kLive) {
    cassette.emplace(config.resolve(config.cassette));
    cassette_backend = std::make_unique<CassetteBackend>(
        *cassette, config.mode == RunMode::kRecord ? CassetteMode::kRecord : CassetteMode::kReplay, upstream);
    backend = cassette_backend.get();
  }

  // Resume: results already on disk, keyed by (group, sample id). Failed cells are retried.
  std::vector<std::map<std::string, TranscriptRecord>> done(prepared.groups.size());
  for (std::size_t g = 0; g < prepared.groups.size(); ++g) {
    for (auto& record : read_transcript(prepared.groups[g].path)) {
      done[g].insert_or_assign(record.sample_id, std::move(record));
    }
  }
  std::vector<std::size_t> pending;
  for (std::size_t c = 0; c < prepared.cells.size(); ++c) {
    const Cell& cell = prepared.cells[c];
    const auto it = done[cell.group].find(cell.sample->id);
    if (it == done[cell.group].end() || it->second.failed) {
      pending.push_back(c);
    } else if (it->second.fingerprint != cell.fingerprint) {
      throw Error("transcript " + prepared.groups[cell.group].path.string() + " was produced by a different request for '" +
                  cell.sample->id + "'; use a fresh output_dir");
    }
  }

  if (config.mode == RunMode::kReplay) {
    std::size_t missing = 0;
    std::string first_missing;
    for (auto c : pending) {
      if (!cassette->lookup(prepared.cells[c].fingerprint)) {
        if (missing++ == 0) first_missing = prepared.cells[c].fingerprint;
      }
    }
    if (missing) {
      if (options.warn) options.warn(std::to_string(missing) + " request(s) missing from the cassette");
      throw ReplayMissError(first_missing);
    }
  }

  const std::size_t total_pending = pending.size();
  if (options.limit && pending.size() > *options.limit) pending.resize(*options.limit);

  std::mutex journal_mutex;
  std::map<std::size_t, std::ofstream> journals;
  auto persist = [&](std::size_t group, TranscriptRecord record) {
    const std::string line = record.to_json().dump() + "\n";
    std::lock_guard lock(journal_mutex);
    auto it = journals.find(group);
    if (it == journals.end()) {
      const auto& path = prepared.groups[group].path;
      std::filesystem::create_directories(path.parent_path());
      it = journals.emplace(group, std::ofstream(path, std::ios::binary | std::ios::app)).first;
    }
    it->second << line;
    it->second.flush();
    if (!it->second) throw Error("cannot append to " + prepared.groups[group].path.string());
    done[group].insert_or_assign(record.sample_id, std::move(record));
  };

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto work = [&] {
    while (!stop.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const Cell& cell = prepared.cells[pending[k]];
      const Group& group = prepared.groups[cell.group];
      const LoadedDataset& dataset = prepared.datasets[group.dataset];
      try {
        TranscriptRecord record = make_record(prepared, cell);
        try {
          const Completion completion = backend->complete(config.backend, cell.request);
          record.parsed = parse_answer(completion.response_text, *dataset.schema);
          record.score = score_sample(record.parsed, *cell.sample, config.scoring);
          record.attempts = completion.attempt_count;
          record.latency_ms = completion.latency.count();
        } catch (const TransportError& e) {
          record.failed = true;
          record.parsed.diagnostics.push_back(std::string("request failed: ") + e.what());
          record.score = {};
          record.attempts = config.backend.max_retries + 1;
        }
        persist(cell.group, std::move(record));
        const std::size_t count = ++finished;
        if (options.progress && (count % 100 == 0 || count == pending.size())) {
          options.progress(std::to_string(count) + "/" + std::to_string(pending.size()) + " requests done");
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop.store(true);
      }
    }
  };

  {
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.parallelism, pending.size()));
    std::vector<std::jthread> threads;
    for (std::size_t i = 1; i < workers; ++i) threads.emplace_back(work);
    work();
  }
  journals.clear();
  if (error) std::rethrow_exception(error);

  RunReport report;
  for (const auto& dataset : prepared.datasets) report.datasets.push_back(dataset.name);
  report.strategies = config.strategies;
  std::sort(report.strategies.begin(), report.strategies.end());
  report.pending = total_pending - pending.size();
  report.complete = report.pending == 0;
  if (!report.complete) return report;

  // Rewrite each transcript in plan order so files do not depend on arrival order.
  json transcript_hashes = json::object();
  for (std::size_t g = 0; g < prepared.groups.size(); ++g) {
    const Group& group = prepared.groups[g];
    std::string content;
    for (auto c : group.cells) content += done[g].at(prepared.cells[c].sample->id).to_json().dump() + "\n";
    write_file_atomically(group.path, content);
    transcript_hashes[std::filesystem::relative(group.path, output_dir).generic_string()] = sha256_hex(content);
  }

  json corpora = json::object(), templates = json::object(), plans = json::object();
  for (std::size_t d = 0; d < prepared.datasets.size(); ++d) {
    const auto& dataset = prepared.datasets[d];
    corpora[dataset.name] = dataset.corpus_sha256;
    for (const auto& [strategy, tmpl] : dataset.templates) templates[dataset.name][to_string(strategy)] = tmpl.hash();
    for (const auto& [seed, plan] : dataset.plans) plans[dataset.name][std::to_string(seed)] = plan.fingerprint();

    for (auto strategy : report.strategies) {
      ReportCell cell;
      cell.dataset = dataset.name;
      cell.task = dataset.schema->task;
      cell.strategy = strategy;
      std::vector<std::vector<const TranscriptRecord*>> runs;
      for (std::size_t g = 0; g < prepared.groups.size(); ++g) {
        const Group& group = prepared.groups[g];
        if (group.dataset != d || group.strategy != strategy) continue;
        std::vector<const TranscriptRecord*> run;
        for (auto c : group.cells) {
          const TranscriptRecord& record = done[g].at(prepared.cells[c].sample->id);
          if (record.failed) ++cell.failures;
          run.push_back(&record);
        }
        runs.push_back(std::move(run));
      }
      cell.score = aggregate_group_runs(runs);
      report.cells.push_back(std::move(cell));
    }
  }

  report.provenance = {{"config", config.snapshot()},
                       {"corpora", corpora},
                       {"templates", templates},
                       {"plans", plans},
                       {"transcripts", transcript_hashes}};
  if (cassette && cassette->path()) report.provenance["cassette_sha256"] = sha256_file(*cassette->path());

  write_file_atomically(output_dir / "report.txt", emit_report(report, ReportFormat::kTable));
  write_file_atomically(output_dir / "report.csv", emit_report(report, ReportFormat::kCsv));
  write_file_atomically(output_dir / "report.json", emit_report(report, ReportFormat::kJson));
  return report;
}

// ---------------------------------------------------------------------------
// Offline re-scoring

RunReport rescore_transcripts(const std::filesystem::path& dir, const SchemaRegistry& schemas,
                              const ScoreOptions& options) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  struct Run {
    std::vector<TranscriptRecord> records;
  };
  // (dataset, strategy) -> seed -> records
  std::map<std::pair<std::string, Strategy>, std::map<std::uint64_t, Run>> grouped;
  std::vector<std::string> dataset_order;
  std::map<std::string, TaskId> dataset_task;
  std::set<Strategy> strategies;

  for (const auto& file : files) {
    for (auto& record : read_transcript(file)) {
      const TaskSchema& schema = schemas.get(record.task);
      if (!record.failed) {
        record.parsed = parse_answer(record.parsed.raw, schema);
        MixedSample gold;
        gold.id = record.sample_id;
        gold.task = record.task;
        gold.text_label = record.gold_text_label;
        gold.gold_pairs = record.gold_pairs;
        record.score = score_sample(record.parsed, gold, options);
      } else {
        record.score = {};
      }
      if (!dataset_task.contains(record.dataset)) {
        dataset_task.emplace(record.dataset, record.task);
        dataset_order.push_back(record.dataset);
      }
      strategies.insert(record.strategy);
      grouped[{record.dataset, record.strategy}][record.seed].records.push_back(std::move(record));
    }
  }

  RunReport report;
  std::sort(dataset_order.begin(), dataset_order.end(), [&](const std::string& a, const std::string& b) {
    return std::pair(dataset_task.at(a), a) < std::pair(dataset_task.at(b), b);
  });
  report.datasets = dataset_order;
  report.strategies.assign(strategies.begin(), strategies.end());
  for (const auto& dataset : report.datasets) {
    for (auto strategy : report.strategies) {
      const auto it = grouped.find({dataset, strategy});
      if (it == grouped.end()) continue;
      ReportCell cell;
      cell.dataset = dataset;
      cell.task = dataset_task.at(dataset);
      cell.strategy = strategy;
      std::vector<std::vector<const TranscriptRecord*>> runs;
      for (const auto& [seed, run] : it->second) {
        std::vector<const TranscriptRecord*> records;
        for (const auto& record : run.records) {
          if (record.failed) ++cell.failures;
          records.push_back(&record);
        }
        runs.push_back(std::move(records));
      }
      cell.score = aggregate_group_runs(runs);
      report.cells.push_back(std::move(cell));
    }
  }
  report.provenance = {{"rescored_from", "transcripts"}};
  return report;
}

}  // namespace tfw
