#include <doctest.h>

#include <stdexcept>

#include "support.hpp"
#include "tfw/metrics.hpp"

using namespace tfw;

namespace {

MixedSample gold(std::string label, std::vector<LabelSpanPair> pairs) {
  return {"g", "text", std::move(label), std::move(pairs), TaskId::kScposRw};
}

ParsedAnswer parsed(std::optional<std::string> label, std::vector<LabelSpanPair> pairs) {
  ParsedAnswer answer;
  answer.text_label = std::move(label);
  answer.pairs = std::move(pairs);
  return answer;
}

}  // namespace

TEST_CASE("perfect answer scores one everywhere") {
  const auto g = gold("positive", {{"positive", "tasty"}, {"negative", "cramped"}});
  CHECK(score_sample(parsed("positive", g.gold_pairs), g) == SampleScore{1, 1, 1});
}

TEST_CASE("label span is the fraction of gold pairs recovered") {
  const auto g = gold("positive", {{"positive", "tasty"}, {"negative", "cramped"}, {"neutral", "station"}});
  const auto s = score_sample(parsed("positive", {{"positive", "tasty"}, {"neutral", "station"}}), g);
  CHECK(s.tc == 1);
  CHECK(s.ls == doctest::Approx(2.0 / 3.0));
  CHECK(s.total == 0);
}

TEST_CASE("extra predicted pairs do not lower label span") {
  const auto g = gold("negative", {{"negative", "cramped"}});
  const auto s = score_sample(parsed("negative", {{"negative", "cramped"}, {"positive", "something"}}), g);
  CHECK(s == SampleScore{1, 1, 1});
}

TEST_CASE("matching is multiset intersection") {
  const auto g = gold("positive", {{"positive", "tasty"}, {"positive", "tasty"}});
  CHECK(score_sample(parsed("positive", {{"positive", "tasty"}}), g).ls == doctest::Approx(0.5));
  CHECK(score_sample(parsed("positive", {{"positive", "tasty"}, {"positive", "tasty"}, {"positive", "tasty"}}), g).ls ==
        1);
  const auto single = gold("positive", {{"positive", "tasty"}});
  CHECK(score_sample(parsed("positive", {{"positive", "tasty"}, {"positive", "tasty"}}), single).ls == 1);
}

TEST_CASE("wrong or missing text label zeroes tc and total") {
  const auto g = gold("positive", {{"positive", "tasty"}});
  CHECK(score_sample(parsed("negative", g.gold_pairs), g) == SampleScore{0, 1, 0});
  CHECK(score_sample(parsed(std::nullopt, g.gold_pairs), g) == SampleScore{0, 1, 0});
  CHECK(score_sample(parsed("Positive", g.gold_pairs), g).tc == 1);
}

TEST_CASE("empty gold pairs follow the configured convention") {
  const auto g = gold("positive", {});
  CHECK(score_sample(parsed("positive", {}), g) == SampleScore{1, 0, 0});
  CHECK(score_sample(parsed("positive", {}), g, {.empty_gold_ls_one = true}) == SampleScore{1, 1, 1});
}

TEST_CASE("aggregate averages per sample then over samples") {
  const std::vector<std::vector<SampleScore>> runs{
      {{1, 1, 1}, {0, 0.5, 0}},
      {{1, 0.5, 0}, {0, 0, 0}},
      {{0, 1, 0}, {1, 1, 1}},
  };
  const auto agg = aggregate(runs);
  CHECK(agg.n_samples == 2);
  CHECK(agg.n_runs == 3);
  CHECK(agg.tc == doctest::Approx(50.0));
  CHECK(agg.ls == doctest::Approx((2.5 / 3 + 1.5 / 3) / 2 * 100));
  CHECK(agg.total == doctest::Approx((1.0 / 3 + 1.0 / 3) / 2 * 100));
}

TEST_CASE("aggregate rejects ragged or mismatched runs") {
  CHECK_THROWS_AS(aggregate(std::vector<std::vector<SampleScore>>{{{1, 1, 1}}, {}}), std::invalid_argument);
  std::vector<std::map<std::string, SampleScore>> keyed(2);
  keyed[0]["a"] = {1, 1, 1};
  keyed[1]["b"] = {1, 1, 1};
  CHECK_THROWS_AS(aggregate(keyed), std::invalid_argument);
  keyed[1].clear();
  keyed[1]["a"] = {0, 0, 0};
  CHECK(aggregate(keyed).tc == doctest::Approx(50.0));
}

TEST_CASE("unpaired aggregate is the mean of run means") {
  const std::vector<std::vector<SampleScore>> runs{{{1, 1, 1}}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
  CHECK(aggregate_unpaired(runs).tc == doctest::Approx(50.0));
}

TEST_CASE("aggregation is bounded and order independent") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + rng.below(30);
    std::vector<std::vector<SampleScore>> runs(3);
    for (auto& run : runs) {
      for (std::uint64_t i = 0; i < n; ++i) {
        const double tc = static_cast<double>(rng.below(2));
        const double ls = static_cast<double>(rng.below(5)) / 4.0;
        run.push_back({tc, ls, tc == 1 && ls == 1 ? 1.0 : 0.0});
      }
    }
    const auto agg = aggregate(runs);
    for (double v : {agg.tc, agg.ls, agg.total}) CHECK((v >= 0 && v <= 100));
    CHECK(agg.total <= std::min(agg.tc, agg.ls) + 1e-9);
    auto reversed = runs;
    for (auto& run : reversed) std::reverse(run.begin(), run.end());
    const auto again = aggregate(reversed);
    CHECK(again.tc == doctest::Approx(agg.tc).epsilon(1e-12));
    CHECK(again.ls == doctest::Approx(agg.ls).epsilon(1e-12));
  }
}
