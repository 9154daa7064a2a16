#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tfw/corpus.hpp"
#include "tfw/response_parser.hpp"

namespace tfw {

struct SampleScore {
  double tc = 0.0;     ///< 0 or 1
  double ls = 0.0;     ///< matched gold pairs / gold pairs
  double total = 0.0;  ///< 1 iff tc == 1 and ls == 1

  bool operator==(const SampleScore&) const = default;
};

struct ScoreOptions {
  /// When gold has no pairs: false scores LS 0 (no pair can be recovered),
  /// true scores LS 1.
  bool empty_gold_ls_one = false;
};

/// TC, LS and Total for one response. LS counts a multiset intersection: each
/// gold pair can be consumed by at most one parsed pair, and spurious parsed
/// pairs do not enter the denominator.
SampleScore score_sample(const ParsedAnswer& parsed, const MixedSample& gold, const ScoreOptions& options = {});

struct AggregateScore {
  double tc = 0.0;  ///< percent
  double ls = 0.0;
  double total = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_runs = 0;

  bool operator==(const AggregateScore&) const = default;
};

/// scores_by_run[r][i] is sample i in run r. Averages each sample over runs,
/// then over samples, times 100. Sums use Neumaier compensation (error well
/// under 1e-12 for any realistic size). Throws std::invalid_argument when runs
/// differ in length.
AggregateScore aggregate(const std::vector<std::vector<SampleScore>>& scores_by_run);

/// Keyed variant: every run must cover the same sample ids.
AggregateScore aggregate(const std::vector<std::map<std::string, SampleScore>>& scores_by_run);

/// Mean over runs of each run's sample mean, for runs over different samples.
AggregateScore aggregate_unpaired(const std::vector<std::vector<SampleScore>>& scores_by_run);

}  // namespace tfw
