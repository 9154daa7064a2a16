#include "tfw/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "tfw/text.hpp"

namespace tfw {

namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::fabs(sum_) >= std::fabs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + compensation_; }

private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace

SampleScore score_sample(const ParsedAnswer& parsed, const MixedSample& gold, const ScoreOptions& options) {
  SampleScore score;
  if (parsed.text_label) score.tc = text::labels_equal(*parsed.text_label, gold.text_label) ? 1.0 : 0.0;

  if (gold.gold_pairs.empty()) {
    score.ls = options.empty_gold_ls_one ? 1.0 : 0.0;
  } else {
    std::map<LabelSpanPair, std::size_t> remaining;
    for (const auto& pair : gold.gold_pairs) ++remaining[pair];
    std::size_t matched = 0;
    for (const auto& pair : parsed.pairs) {
      const auto it = remaining.find(pair);
      if (it != remaining.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    score.ls = static_cast<double>(matched) / static_cast<double>(gold.gold_pairs.size());
  }

  score.total = (score.tc == 1.0 && score.ls == 1.0) ? 1.0 : 0.0;
  return score;
}

AggregateScore aggregate(const std::vector<std::vector<SampleScore>>& scores_by_run) {
  AggregateScore result;
  result.n_runs = scores_by_run.size();
  if (scores_by_run.empty()) return result;
  const std::size_t n = scores_by_run.front().size();
  for (const auto& run : scores_by_run) {
    if (run.size() != n) throw std::invalid_argument("aggregate: runs have different sample counts");
  }
  result.n_samples = n;
  if (n == 0) return result;

  const auto runs = static_cast<double>(scores_by_run.size());
  CompensatedSum tc, ls, total;
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum sample_tc, sample_ls, sample_total;
    for (const auto& run : scores_by_run) {
      sample_tc.add(run[i].tc);
      sample_ls.add(run[i].ls);
      sample_total.add(run[i].total);
    }
    tc.add(sample_tc.value() / runs);
    ls.add(sample_ls.value() / runs);
    total.add(sample_total.value() / runs);
  }
  const auto samples = static_cast<double>(n);
  result.tc = 100.0 * tc.value() / samples;
  result.ls = 100.0 * ls.value() / samples;
  result.total = 100.0 * total.value() / samples;
  return result;
}

AggregateScore aggregate(const std::vector<std::map<std::string, SampleScore>>& scores_by_run) {
  std::vector<std::vector<SampleScore>> aligned;
  aligned.reserve(scores_by_run.size());
  for (const auto& run : scores_by_run) {
    if (run.size() != scores_by_run.front().size() ||
        !std::equal(run.begin(), run.end(), scores_by_run.front().begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw std::invalid_argument("aggregate: runs cover different sample ids");
    }
    std::vector<SampleScore> scores;
    scores.reserve(run.size());
    for (const auto& [id, score] : run) scores.push_back(score);
    aligned.push_back(std::move(scores));
  }
  return aggregate(aligned);
}

AggregateScore aggregate_unpaired(const std::vector<std::vector<SampleScore>>& scores_by_run) {
  AggregateScore result;
  result.n_runs = scores_by_run.size();
  if (scores_by_run.empty()) return result;
  CompensatedSum tc, ls, total;
  std::size_t counted_runs = 0;
  for (const auto& run : scores_by_run) {
    result.n_samples = std::max(result.n_samples, run.size());
    if (run.empty()) continue;
    const AggregateScore single = aggregate(std::vector<std::vector<SampleScore>>{run});
    tc.add(single.tc);
    ls.add(single.ls);
    total.add(single.total);
    ++counted_runs;
  }
  if (counted_runs == 0) return result;
  const auto runs = static_cast<double>(counted_runs);
  result.tc = tc.value() / runs;
  result.ls = ls.value() / runs;
  result.total = total.value() / runs;
  return result;
}

}  // namespace tfw
