#include <fstream>
#include <iterator>
#include <mutex>

#include <json.hpp>

#include "tfw/backend.hpp"
#include "tfw/error.hpp"

namespace tfw {

using nlohmann::json;

std::vector<CassetteEntry> Cassette::read_entries(std::istream& in) {
  std::vector<CassetteEntry> entries;
  std::map<std::string, std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json object = json::parse(line, nullptr, false);
    if (object.is_discarded() || !object.is_object()) {
      // A torn final line from an interrupted writer is tolerated.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError("cassette: malformed JSON", line_number);
    }
    CassetteEntry entry;
    try {
      entry.fingerprint = object.at("fingerprint").get<std::string>();
      entry.response_text = object.at("response_text").get<std::string>();
      entry.model = object.value("model", "");
      entry.timestamp = object.value("timestamp", "");
    } catch (const json::exception& e) {
      throw ParseError(std::string("cassette: ") + e.what(), line_number);
    }
    if (entry.fingerprint.size() != 64 ||
        entry.fingerprint.find_first_not_of("0123456789abcdef") != std::string::npos) {
      throw ParseError("cassette: fingerprint is not a SHA-256 hex digest", line_number);
    }
    const auto [it, inserted] = seen.emplace(entry.fingerprint, entry.response_text);
    if (!inserted) {
      if (it->second != entry.response_text) {
        throw ParseError("cassette: fingerprint " + entry.fingerprint + " recorded with two different responses",
                         line_number);
      }
      continue;
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

Cassette::Cassette(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_, std::ios::binary);
  if (!in) return;
  for (auto& entry : read_entries(in)) {
    order_.push_back(entry.fingerprint);
    entries_.emplace(entry.fingerprint, std::move(entry));
  }
  // An interrupted writer can leave a final line without its newline. A
  // complete entry just needs the newline; a fragment is cut off before the
  // next append so it cannot end up in the middle of the file.
  in.clear();
  in.seekg(0, std::ios::beg);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!content.empty() && content.back() != '\n') {
    const auto last_newline = content.rfind('\n');
    const std::size_t tail_begin = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (json::parse(content.substr(tail_begin), nullptr, false).is_object()) {
      torn_tail_ = TornTail::kMissingNewline;
    } else {
      torn_tail_ = TornTail::kFragment;
      valid_size_ = tail_begin;
    }
  }
}

std::optional<std::string> Cassette::lookup(const std::string& fingerprint) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(fingerprint);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response_text;
}

bool Cassette::record(CassetteEntry entry) {
  std::unique_lock lock(mutex_);
  if (entries_.contains(entry.fingerprint)) return false;
  if (path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    if (torn_tail_ == TornTail::kFragment) std::filesystem::resize_file(*path_, valid_size_);
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    if (torn_tail_ == TornTail::kMissingNewline) out << '\n';
    torn_tail_ = TornTail::kNone;
    const json object = {{"fingerprint", entry.fingerprint},
                         {"response_text", entry.response_text},
                         {"model", entry.model},
                         {"timestamp", entry.timestamp}};
    out << object.dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot append to cassette " + path_->string());
  }
  order_.push_back(entry.fingerprint);
  entries_.emplace(entry.fingerprint, std::move(entry));
  return true;
}

std::size_t Cassette::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<CassetteEntry> Cassette::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<CassetteEntry> out;
  out.reserve(order_.size());
  for (const auto& fingerprint : order_) out.push_back(entries_.at(fingerprint));
  return out;
}

std::string Cassette::model_name() const {
  std::shared_lock lock(mutex_);
  return order_.empty() ? std::string() : entries_.at(order_.front()).model;
}

std::string Cassette::created() const {
  std::shared_lock lock(mutex_);
  std::string earliest;
  for (const auto& [fingerprint, entry] : entries_) {
    if (!entry.timestamp.empty() && (earliest.empty() || entry.timestamp < earliest)) earliest = entry.timestamp;
  }
  return earliest;
}

CassetteBackend::CassetteBackend(Cassette& cassette, CassetteMode mode, Backend* upstream)
    : cassette_(cassette), mode_(mode), upstream_(upstream) {
  if (mode_ == CassetteMode::kRecord && !upstream_) throw ConfigError("record mode needs an upstream backend");
}

Completion CassetteBackend::complete(const BackendConfig& config, const ChatRequest& request) {
  const std::string fingerprint = request_fingerprint(config, request);
  if (auto stored = cassette_.lookup(fingerprint)) {
    Completion completion;
    completion.request_fingerprint = fingerprint;
    completion.response_text = std::move(*stored);
    completion.attempt_count = 1;
    return completion;
  }
  if (mode_ == CassetteMode::kReplay) throw ReplayMissError(fingerprint);

  Completion completion = upstream_->complete(config, request);
  cassette_.record({fingerprint, completion.response_text, config.model_name, utc_timestamp()});
  return completion;
}

}  // namespace tfw
