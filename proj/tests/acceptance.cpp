// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "support.hpp"
#include "tfw/metrics.hpp"
#include "tfw/response_parser.hpp"
#include "tfw/runner.hpp"

using namespace tfw;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

const std::vector<std::pair<TaskId, std::string>> kFixtures = {
    {TaskId::kScnm, "scnm"},           {TaskId::kScposRw, "scpos_rw"},       {TaskId::kScposN, "scpos_n"},
    {TaskId::kScposAdj, "scpos_adj"}, {TaskId::kScposNAdj, "scpos_n_adj"}, {TaskId::kTcree, "tcree"},
};

fs::path fixture(const std::string& name) { return tfw::testing::data_dir() / "fixtures" / (name + ".jsonl"); }

// ---------------------------------------------------------------------------

Outcome closed_loop() {
  const auto start = Clock::now();
  const auto out = tfw::testing::scratch_dir("acceptance-closed-loop");
  const auto& registry = SchemaRegistry::builtin();
  std::vector<MixedSample> all;
  std::string yaml = "strategies: [TFW]\nsample_count: all\nmode: live\noutput_dir: '" + out.string() +
                     "'\nbackend: {endpoint_url: 'http://127.0.0.1:9/v1', api_key_env: ''}\ndatasets:\n";
  for (const auto& [task, name] : kFixtures) {
    const auto samples = load_corpus(fixture(name), registry.get(task));
    if (samples.size() != 200) return {false, name + " fixture has " + std::to_string(samples.size()) + " samples"};
    all.insert(all.end(), samples.begin(), samples.end());
    yaml += "  - {task: " + std::string(to_string(task)) + ", corpus: '" + fixture(name).string() + "'}\n";
  }
  const auto config = ExperimentConfig::from_yaml(yaml);
  const tfw::testing::ExpectedAnswerModel model(Strategy::kTfw,
                                                TemplateLibrary().load("en", TaskId::kScnm, Strategy::kTfw), all);
  FunctionBackend backend(std::cref(model));
  RunOptions options;
  options.upstream = &backend;
  options.warn = nullptr;
  const auto report = run_experiment(config, options);
  const double elapsed = seconds_since(start);

  std::string worst;
  for (const auto& cell : report.cells) {
    if (cell.score.tc != 100.0 || cell.score.ls != 100.0 || cell.score.total != 100.0) {
      worst = cell.dataset + " " + fmt(cell.score.tc) + "/" + fmt(cell.score.ls) + "/" + fmt(cell.score.total);
    }
  }
  const bool pass = report.complete && report.cells.size() == 6 && worst.empty() && elapsed < 10.0;
  return {pass, "6 tasks x 3 seeds, TC=LS=Total=100.00" + (worst.empty() ? "" : " violated by " + worst) + ", " +
                    fmt(elapsed) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------------------

/// Largest number of gold pairs that can be paired one-to-one with equal
/// predicted pairs, by trying every assignment.
std::size_t brute_force_matches(const std::vector<LabelSpanPair>& gold, const std::vector<LabelSpanPair>& predicted,
                                std::size_t g = 0, std::vector<bool>* used = nullptr) {
  std::vector<bool> local(predicted.size(), false);
  if (!used) used = &local;
  if (g == gold.size()) return 0;
  std::size_t best = brute_force_matches(gold, predicted, g + 1, used);  // leave gold[g] unmatched
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    if ((*used)[p] || !(predicted[p] == gold[g])) continue;
    (*used)[p] = true;
    best = std::max(best, 1 + brute_force_matches(gold, predicted, g + 1, used));
    (*used)[p] = false;
  }
  return best;
}

Outcome algorithm_oracle() {
  const auto start = Clock::now();
  const auto& schema = SchemaRegistry::builtin().get(TaskId::kScposAdj);
  std::vector<LabelSpanPair> universe;
  for (const char* label : {"positive", "negative"}) {
    for (const char* span : {"x", "y", "z"}) universe.push_back({label, span});
  }
  std::vector<std::vector<LabelSpanPair>> lists{{}};
  for (std::size_t length = 1; length <= 3; ++length) {
    std::vector<std::vector<LabelSpanPair>> next;
    for (const auto& list : lists) {
      if (list.size() != length - 1) continue;
      for (const auto& pair : universe) {
        auto extended = list;
        extended.push_back(pair);
        next.push_back(std::move(extended));
      }
    }
    lists.insert(lists.end(), next.begin(), next.end());
  }

  std::size_t cases = 0, mismatches = 0;
  for (const auto& gold_pairs : lists) {
    const MixedSample gold{"g", "t", "positive", gold_pairs, schema.task};
    for (const auto& predicted : lists) {
      for (int label_case = 0; label_case < 3; ++label_case) {
        ParsedAnswer parsed;
        parsed.pairs = predicted;
        if (label_case == 0) parsed.text_label = "positive";
        if (label_case == 1) parsed.text_label = "negative";
        for (bool empty_one : {false, true}) {
          const double tc = label_case == 0 ? 1.0 : 0.0;
          double ls = empty_one ? 1.0 : 0.0;
          if (!gold_pairs.empty()) {
            ls = static_cast<double>(brute_force_matches(gold_pairs, predicted)) / static_cast<double>(gold_pairs.size());
          }
          const double total = (tc == 1.0 && ls == 1.0) ? 1.0 : 0.0;
          const auto got = score_sample(parsed, gold, {.empty_gold_ls_one = empty_one});
          ++cases;
          if (got.tc != tc || got.ls != ls || got.total != total) ++mismatches;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 5.0, std::to_string(cases - mismatches) + "/" + std::to_string(cases) +
                                                " cases agree, " + fmt(elapsed) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------------------

std::string random_noise(SplitMix64& rng) {
  static const std::vector<std::string> pieces = {"Sure", "here", "is", "the", "answer", "positive", "IT", "women",
                                                  "。",   "、",   "!",  "?",   "(",      ")",        "-",  "*",
                                                  "#",    "42",   "答え", "です", "people", "→",       "\t", "\"",
                                                  "'",    ",",    "."};
  std::string noise;
  const auto n = rng.below(6);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (i) noise += ' ';
    noise += pieces[rng.below(pieces.size())];
  }
  return noise;
}

Outcome parser_round_trip() {
  const auto schemas = SchemaRegistry::builtin().all();
  SplitMix64 rng(20240101);
  std::size_t round_trip_ok = 0, noise_ok = 0;
  const std::size_t trials = 2000;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& schema = schemas[t % schemas.size()];
    const auto pairs = tfw::testing::random_pairs(rng, schema, 8);
    if (parse_pairs(render_pairs(pairs), schema) == pairs) ++round_trip_ok;

    // Split the pairs over lines, with noise lines between them and noise
    // (ending in a space) before the first pair of a line.
    std::string text = rng.below(2) ? random_noise(rng) + "\n" : "";
    std::size_t i = 0;
    while (i < pairs.size()) {
      const std::size_t on_line = 1 + rng.below(pairs.size() - i);
      if (rng.below(2)) text += random_noise(rng) + " ";
      text += render_pairs(std::span(pairs).subspan(i, on_line));
      i += on_line;
      text += rng.below(3) ? "\n" : "\r\n";
      if (rng.below(2)) text += random_noise(rng) + "\n";
    }
    text += schema.text_labels[rng.below(schema.text_labels.size())];
    auto parsed = parse_pairs(text, schema);
    auto expected = pairs;
    std::sort(parsed.begin(), parsed.end());
    std::sort(expected.begin(), expected.end());
    if (parsed == expected) ++noise_ok;
  }
  return {round_trip_ok == trials && noise_ok == trials,
          "round-trip " + std::to_string(round_trip_ok) + "/" + std::to_string(trials) + ", noise invariance " +
              std::to_string(noise_ok) + "/" + std::to_string(trials)};
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string command = std::string(TFW_CLI) + " " + args + " >/dev/null 2>&1";
  return std::system(command.c_str());
}

std::string report_bytes(const fs::path& dir) {
  std::string all;
  for (const char* file : {"report.txt", "report.csv", "report.json"}) all += tfw::testing::read_file(dir / file) + '\x1e';
  return all;
}

Outcome replay_determinism() {
  const auto config = (tfw::testing::data_dir() / "replay" / "experiment.yaml").string();
  const auto a = tfw::testing::scratch_dir("acceptance-replay-a");
  const auto b = tfw::testing::scratch_dir("acceptance-replay-b");
  const auto c = tfw::testing::scratch_dir("acceptance-replay-c");
  if (run_cli("run --mode replay --quiet --config '" + config + "' --output-dir '" + a.string() + "'") != 0 ||
      run_cli("run --mode replay --quiet --config '" + config + "' --output-dir '" + b.string() + "'") != 0) {
    return {false, "replay run failed"};
  }
  const std::size_t cells = planned_fingerprints(ExperimentConfig::from_file(config)).size();
  if (run_cli("run --mode replay --quiet --config '" + config + "' --output-dir '" + c.string() + "' --limit " +
              std::to_string(cells / 2)) != 0 ||
      fs::exists(c / "report.txt") ||
      run_cli("run --mode replay --quiet --config '" + config + "' --output-dir '" + c.string() + "'") != 0) {
    return {false, "interrupted replay failed"};
  }
  const auto ra = report_bytes(a), rb = report_bytes(b), rc = report_bytes(c);
  const bool pass = ra == rb && ra == rc && ra.size() > 10;
  return {pass, std::string("two replays ") + (ra == rb ? "identical" : "differ") + ", resume after " +
                    std::to_string(cells / 2) + "/" + std::to_string(cells) + " cells " +
                    (ra == rc ? "identical" : "differs")};
}

// ---------------------------------------------------------------------------

Outcome plan_stability() {
  const auto golden = nlohmann::json::parse(tfw::testing::read_file(tfw::testing::data_dir() / "golden" / "plans.json"));
  const auto& registry = SchemaRegistry::builtin();
  std::size_t checked = 0, matched = 0;
  for (const auto& [task, name] : kFixtures) {
    const auto& schema = registry.get(task);
    const auto corpus = load_corpus(fixture(name), schema);
    for (const auto& plan : golden.at(std::string(to_string(task))).at("plans")) {
      const std::size_t count = plan.contains("sample_count") ? plan["sample_count"].get<std::size_t>() : kAllSamples;
      const auto drawn = draw_plan(corpus, schema, plan["seed"].get<std::uint64_t>(), count);
      ++checked;
      if (drawn.exemplar_ids == plan["exemplar_ids"].get<std::vector<std::string>>() &&
          drawn.drawn_ids == plan["drawn_ids"].get<std::vector<std::string>>()) {
        ++matched;
      }
    }
  }
  return {checked == 36 && matched == checked,
          std::to_string(matched) + "/" + std::to_string(checked) + " golden plans (seeds 42, 123123, 678910)"};
}

// ---------------------------------------------------------------------------

Outcome aggregation_arithmetic() {
  using boost::multiprecision::cpp_rational;
  SplitMix64 rng(99);
  const int trials = 500;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.below(t < 50 ? 5 : 3000);
    std::vector<std::vector<SampleScore>> runs(3);
    std::vector<std::vector<std::array<cpp_rational, 3>>> exact(3);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        const int tc = static_cast<int>(rng.below(2));
        const int denominator = 1 + static_cast<int>(rng.below(7));
        const int numerator = static_cast<int>(rng.below(denominator + 1));
        const bool total = tc == 1 && numerator == denominator;
        runs[r].push_back({double(tc), double(numerator) / double(denominator), total ? 1.0 : 0.0});
        exact[r].push_back({cpp_rational(tc), cpp_rational(numerator, denominator), cpp_rational(total ? 1 : 0)});
      }
    }
    const auto agg = aggregate(runs);
    const double got[3] = {agg.tc, agg.ls, agg.total};
    for (int m = 0; m < 3; ++m) {
      cpp_rational sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cpp_rational per_sample = 0;
        for (std::size_t r = 0; r < 3; ++r) per_sample += exact[r][i][m];
        sum += per_sample / 3;
      }
      const cpp_rational expected = sum * 100 / static_cast<long long>(n);
      const double error = std::abs(static_cast<double>(cpp_rational(expected - cpp_rational(got[m]))));
      worst = std::max(worst, error);
    }
  }
  std::ostringstream detail;
  detail << trials << " trials, max |error| " << worst << " (limit 1e-9)";
  return {worst <= 1e-9, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome report_fidelity() {
  RunReport report;
  report.datasets = {"SCNM", "SCPOS:RW", "SCPOS:N", "SCPOS:Adj", "SCPOS:Adj&N", "TCREE"};
  report.strategies = {Strategy::kBaselineIclIl, Strategy::kTfw, Strategy::kTfwExtra};
  SplitMix64 rng(2024);
  for (const auto& dataset : report.datasets) {
    for (auto strategy : report.strategies) {
      ReportCell cell;
      cell.dataset = dataset;
      cell.strategy = strategy;
      cell.score.tc = static_cast<double>(rng.below(1000001)) / 10000.0;
      if (scores_pairs(strategy)) {
        cell.score.ls = static_cast<double>(rng.below(1000001)) / 10000.0;
        cell.score.total = std::min(cell.score.tc, cell.score.ls) / 2;
      }
      cell.score.n_samples = 1000;
      cell.score.n_runs = 3;
      report.cells.push_back(cell);
    }
  }
  const auto table = emit_report(report, ReportFormat::kTable);
  const auto golden = tfw::testing::read_file(tfw::testing::data_dir() / "golden" / "report_table.txt");
  if (table == golden) return {true, "table matches golden file byte for byte"};
  tfw::testing::write_file(fs::temp_directory_path() / "tfw-report_table.actual.txt", table);
  return {false, "table differs from golden file (actual written to tfw-report_table.actual.txt in the temp dir)"};
}

// ---------------------------------------------------------------------------

Outcome degenerate_totality() {
  const auto schemas = SchemaRegistry::builtin().all();
  SplitMix64 rng(7);
  const std::string specials[] = {":", ";", "：", "；", "\n", "\r", "positive", "IT", "people", " ", "\xE3\x80\x80",
                                  "\xCC\x81"};
  std::size_t ok = 0;
  const std::size_t trials = 10000;
  for (std::size_t t = 0; t < trials; ++t) {
    std::string bytes;
    const auto length = rng.below(200);
    while (bytes.size() < length) {
      if (rng.below(4) == 0) {
        bytes += specials[rng.below(std::size(specials))];
      } else {
        bytes += static_cast<char>(rng.below(256));
      }
    }
    try {
      const auto parsed = parse_answer(bytes, schemas[t % schemas.size()]);
      if (parsed.raw == bytes) ++ok;
    } catch (...) {
    }
  }
  return {ok == trials, std::to_string(ok) + "/" + std::to_string(trials) + " random byte strings parsed"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed-loop perfection", closed_loop},
      {"scoring oracle equivalence", algorithm_oracle},
      {"parser round-trip and noise invariance", parser_round_trip},
      {"replay determinism and resume", replay_determinism},
      {"seeded plan stability", plan_stability},
      {"aggregation arithmetic", aggregation_arithmetic},
      {"report fidelity", report_fidelity},
      {"degenerate totality", degenerate_totality},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << name << ": " << outcome.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
