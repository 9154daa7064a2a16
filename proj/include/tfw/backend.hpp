#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tfw/promptgen.hpp"

namespace tfw {

struct BackendConfig {
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 512;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  /// Empty disables the Authorization header (local servers).
  std::string api_key_env = "OPENAI_API_KEY";
  /// 0 disables rate limiting.
  double requests_per_minute = 0.0;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{30'000};

  /// Throws ConfigError.
  void validate() const;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  /// Sent as the `seed` field and included in the fingerprint when set.
  std::optional<std::int64_t> seed;
};

ChatRequest single_user_request(std::string prompt, std::optional<std::int64_t> seed = std::nullopt);

struct Completion {
  std::string request_fingerprint;
  std::string response_text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

/// Canonical JSON (sorted keys, no whitespace) of
/// {"messages":[{"content","role"}...],"model","temperature"[,"seed"]}.
std::string canonical_request_json(const BackendConfig& config, const ChatRequest& request);

/// SHA-256 hex of canonical_request_json.
std::string request_fingerprint(const BackendConfig& config, const ChatRequest& request);

/// Wire body for POST {endpoint}/chat/completions.
std::string chat_request_body(const BackendConfig& config, const ChatRequest& request);

/// choices[0].message.content of a chat-completions response body.
/// Throws TransportError on an unexpected shape.
std::string parse_chat_response(std::string_view body);

class Backend {
public:
  virtual ~Backend() = default;
  virtual Completion complete(const BackendConfig& config, const ChatRequest& request) = 0;

  Completion complete(const BackendConfig& config, const std::string& prompt) {
    return complete(config, single_user_request(prompt));
  }
};

/// Blocking token bucket: `rate_per_minute` tokens per minute, burst `capacity`.
class TokenBucket {
public:
  TokenBucket(double rate_per_minute, double capacity = 1.0);

  void acquire();

private:
  double rate_per_second_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

/// OpenAI-compatible chat-completions client over HTTP(S). Retries connection
/// failures, 429 and 5xx with exponential backoff; other statuses fail at once.
/// Thread-safe: each call opens its own connection.
class HttpBackend : public Backend {
public:
  using Backend::complete;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpBackend();
  /// For tests: replaces std::this_thread::sleep_for during backoff.
  explicit HttpBackend(Sleeper sleeper);

  Completion complete(const BackendConfig& config, const ChatRequest& request) override;

private:
  Sleeper sleep_;
  std::mutex bucket_mutex_;
  std::unique_ptr<TokenBucket> bucket_;
  double bucket_rate_ = 0.0;
};

/// Answers every request through a callback. Used for stub and oracle models.
class FunctionBackend : public Backend {
public:
  using Backend::complete;
  using Handler = std::function<std::string(const ChatRequest&)>;

  explicit FunctionBackend(Handler handler) : handler_(std::move(handler)) {}

  Completion complete(const BackendConfig& config, const ChatRequest& request) override;

private:
  Handler handler_;
};

struct CassetteEntry {
  std::string fingerprint;
  std::string response_text;
  std::string model;
  std::string timestamp;
};

/// Fingerprint -> recorded response, persisted as JSONL of
/// {"fingerprint","response_text","model","timestamp"}.
///
/// Single writer, many readers: record() appends and flushes the line before
/// the entry becomes visible to lookup().
class Cassette {
public:
  Cassette() = default;
  /// Loads `path` if it exists; later record() calls append to it.
  explicit Cassette(std::filesystem::path path);

  Cassette(const Cassette&) = delete;
  Cassette& operator=(const Cassette&) = delete;

  std::optional<std::string> lookup(const std::string& fingerprint) const;

  /// Returns false (and writes nothing) if the fingerprint is already present.
  bool record(CassetteEntry entry);

  std::size_t size() const;
  std::vector<CassetteEntry> entries() const;
  std::string model_name() const;
  std::string created() const;
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

  /// Parses cassette JSONL. Throws ParseError on malformed lines and on the
  /// same fingerprint mapped to two different responses.
  static std::vector<CassetteEntry> read_entries(std::istream& in);

private:
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, CassetteEntry> entries_;
  std::vector<std::string> order_;
  enum class TornTail { kNone, kMissingNewline, kFragment };
  TornTail torn_tail_ = TornTail::kNone;
  std::uintmax_t valid_size_ = 0;
};

enum class CassetteMode { kRecord, kReplay };

/// Replay serves only from the cassette and never calls upstream. Record
/// serves hits from the cassette and forwards misses upstream, storing them.
class CassetteBackend : public Backend {
public:
  using Backend::complete;

  CassetteBackend(Cassette& cassette, CassetteMode mode, Backend* upstream = nullptr);

  Completion complete(const BackendConfig& config, const ChatRequest& request) override;

private:
  Cassette& cassette_;
  CassetteMode mode_;
  Backend* upstream_;
};

std::string utc_timestamp();

}  // namespace tfw
