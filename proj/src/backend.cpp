#include "tfw/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tfw/error.hpp"
#include "tfw/hash.hpp"

namespace tfw {

using nlohmann::json;

void BackendConfig::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0) throw ConfigError("backend: temperature must be finite and >= 0");
  if (timeout.count() <= 0) throw ConfigError("backend: timeout must be positive");
  if (max_tokens <= 0) throw ConfigError("backend: max_tokens must be positive");
  if (max_retries < 0) throw ConfigError("backend: max_retries must be >= 0");
  if (model_name.empty()) throw ConfigError("backend: model name is empty");
  if (!endpoint_url.starts_with("http://") && !endpoint_url.starts_with("https://")) {
    throw ConfigError("backend: endpoint_url must start with http:// or https://");
  }
  if (!(requests_per_minute >= 0.0)) throw ConfigError("backend: requests_per_minute must be >= 0");
}

ChatRequest single_user_request(std::string prompt, std::optional<std::int64_t> seed) {
  ChatRequest request;
  request.messages.push_back({"user", std::move(prompt)});
  request.seed = seed;
  return request;
}

namespace {

json messages_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& message : request.messages) {
    messages.push_back({{"role", message.role}, {"content", message.content}});
  }
  return messages;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("backend: endpoint_url needs a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  Endpoint endpoint;
  endpoint.origin = url.substr(0, path_begin);
  endpoint.path = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!endpoint.path.empty() && endpoint.path.back() == '/') endpoint.path.pop_back();
  return endpoint;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string canonical_request_json(const BackendConfig& config, const ChatRequest& request) {
  json object = {{"model", config.model_name}, {"temperature", config.temperature}, {"messages", messages_json(request)}};
  if (request.seed) object["seed"] = *request.seed;
  return object.dump();
}

std::string request_fingerprint(const BackendConfig& config, const ChatRequest& request) {
  return sha256_hex(canonical_request_json(config, request));
}

std::string chat_request_body(const BackendConfig& config, const ChatRequest& request) {
  json object = {{"model", config.model_name},
                 {"temperature", config.temperature},
                 {"max_tokens", config.max_tokens},
                 {"messages", messages_json(request)}};
  if (request.seed) object["seed"] = *request.seed;
  return object.dump();
}

std::string parse_chat_response(std::string_view body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw TransportError(0, "response body is not JSON");
  try {
    const auto& content = parsed.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw TransportError(0, "response lacks choices[0].message.content");
  }
}

TokenBucket::TokenBucket(double rate_per_minute, double capacity)
    : rate_per_second_(rate_per_minute / 60.0),
      capacity_(capacity),
      tokens_(capacity),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const std::chrono::duration<double> elapsed = now - last_;
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed.count() * rate_per_second_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_seconds = (1.0 - tokens_) / rate_per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_seconds));
    lock.lock();
  }
}

HttpBackend::HttpBackend() : HttpBackend([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

HttpBackend::HttpBackend(Sleeper sleeper) : sleep_(std::move(sleeper)) {}

Completion HttpBackend::complete(const BackendConfig& config, const ChatRequest& request) {
  config.validate();
  httplib::Headers headers;
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + config.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  if (config.requests_per_minute > 0.0) {
    std::lock_guard lock(bucket_mutex_);
    if (!bucket_ || bucket_rate_ != config.requests_per_minute) {
      bucket_ = std::make_unique<TokenBucket>(config.requests_per_minute);
      bucket_rate_ = config.requests_per_minute;
    }
  }

  const Endpoint endpoint = split_endpoint(config.endpoint_url);
  const std::string body = chat_request_body(config, request);
  const auto started = std::chrono::steady_clock::now();

  Completion completion;
  completion.request_fingerprint = request_fingerprint(config, request);
  int last_status = 0;
  std::string last_error;
  auto backoff = config.backoff_initial;

  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    completion.attempt_count = attempt;
    if (bucket_) bucket_->acquire();

    httplib::Client client(endpoint.origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - seconds);
    client.set_connection_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_read_timeout(seconds.count(), static_cast<time_t>(micros.count()));
    client.set_write_timeout(seconds.count(), static_cast<time_t>(micros.count()));

    const auto result = client.Post(endpoint.path + "/chat/completions", headers, body, "application/json");
    if (result && result->status >= 200 && result->status < 300) {
      completion.response_text = parse_chat_response(result->body);
      completion.latency =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
      return completion;
    }
    if (result) {
      last_status = result->status;
      last_error = result->body.substr(0, 200);
      if (!retryable_status(result->status)) break;
    } else {
      last_status = 0;
      last_error = "connection failed: " + httplib::to_string(result.error());
    }
    if (attempt <= config.max_retries) {
      sleep_(backoff);
      backoff = std::min(backoff * 2, config.backoff_max);
    }
  }
  throw TransportError(last_status, last_error + " (after " + std::to_string(completion.attempt_count) + " attempt(s))");
}

Completion FunctionBackend::complete(const BackendConfig& config, const ChatRequest& request) {
  Completion completion;
  completion.request_fingerprint = request_fingerprint(config, request);
  completion.response_text = handler_(request);
  return completion;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

}  // namespace tfw
