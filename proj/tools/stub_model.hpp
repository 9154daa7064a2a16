#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfw/backend.hpp"
#include "tfw/corpus.hpp"
#include "tfw/schema.hpp"

namespace tfw::stub {

/// Deterministic stand-in for a chat model, for recording offline cassettes.
///
/// It recognises the target sample as the corpus text that occurs last in the
/// prompt and answers in TFW layout when an exemplar answer in the prompt shows
/// pairs, label-only otherwise. Noise (wrong label, dropped or spurious pairs,
/// chatter) is a pure function of the request, so re-recording is stable.
class SimulatedModel {
public:
  struct Options {
    double error_rate = 0.2;
    bool chatter = true;
  };

  SimulatedModel(std::vector<std::pair<TaskSchema, std::vector<MixedSample>>> corpora, Options options);

  std::string answer(const ChatRequest& request) const;

private:
  std::vector<std::pair<TaskSchema, std::vector<MixedSample>>> corpora_;
  Options options_;
};

/// Chat-completions response JSON wrapping `content`.
std::string chat_response_body(const std::string& content);

}  // namespace tfw::stub
