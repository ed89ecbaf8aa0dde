#include "fogroute/metrics_store.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace fogroute::metrics {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
  case Outcome::success:
    return "success";
  case Outcome::remote_failure_then_fallback:
    return "remote_failure_then_fallback";
  case Outcome::failure:
    return "failure";
  }
  return "unknown";
}

Outcome parse_outcome(std::string_view name) {
  for (auto outcome :
       {Outcome::success, Outcome::remote_failure_then_fallback, Outcome::failure}) {
    if (name == to_string(outcome)) {
      return outcome;
    }
  }
  throw std::invalid_argument("unknown outcome: " + std::string(name));
}

bool is_observation(Outcome outcome) { return outcome != Outcome::failure; }

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const auto seconds = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() %
      1000;
  std::tm parts{};
  gmtime_r(&seconds, &parts);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                parts.tm_year + 1900, parts.tm_mon + 1, parts.tm_mday, parts.tm_hour,
                parts.tm_min, parts.tm_sec, static_cast<int>(millis));
  return buffer;
}

ordered_json to_json(const ExecutionRecord& record) {
  return ordered_json{{"function", record.function},
                      {"environment", record.environment},
                      {"duration", record.duration},
                      {"timestamp", record.timestamp},
                      {"outcome", to_string(record.outcome)}};
}

ExecutionRecord record_from_json(const json& item) {
  if (!item.is_object()) {
    throw std::invalid_argument("record must be an object");
  }
  ExecutionRecord record;
  try {
    record.function = item.at("function").get<std::string>();
    record.environment = item.at("environment").get<std::string>();
    if (item.contains("duration")) {
      record.duration = item["duration"].get<double>();
    } else if (item.contains("duration_ms")) {
      record.duration = item["duration_ms"].get<double>() / 1000.0;
    } else {
      throw std::invalid_argument("record lacks a duration");
    }
    record.timestamp = item.value("timestamp", std::string{});
    record.outcome = parse_outcome(item.value("outcome", std::string{"success"}));
  } catch (const json::exception& error) {
    throw std::invalid_argument(std::string("malformed record: ") + error.what());
  }
  return record;
}

ordered_json to_json(const StatsSummary& summary) {
  auto entries = ordered_json::array();
  for (const auto& entry : summary) {
    entries.push_back(ordered_json{{"function", entry.function},
                                   {"environment", entry.environment},
                                   {"count", entry.count},
                                   {"mean", entry.mean},
                                   {"min", entry.min},
                                   {"max", entry.max},
                                   {"stddev", entry.stddev}});
  }
  return entries;
}

StatsSummary summarize_records(const std::vector<ExecutionRecord>& records) {
  struct Accumulator {
    bandit::ArmStats stats;
    double min = 0.0;
    double max = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Accumulator> groups;
  for (const auto& record : records) {
    if (!is_observation(record.outcome)) {
      continue;
    }
    auto& acc = groups[{record.function, record.environment}];
    if (acc.stats.pulls == 0) {
      acc.min = acc.max = record.duration;
    } else {
      acc.min = std::min(acc.min, record.duration);
      acc.max = std::max(acc.max, record.duration);
    }
    acc.stats = bandit::update(acc.stats, record.duration);
  }
  StatsSummary summary;
  for (const auto& [key, acc] : groups) {
    summary.push_back({key.first, key.second, acc.stats.pulls,
                       std::clamp(acc.stats.mean_duration, acc.min, acc.max), acc.min, acc.max,
                       acc.stats.stddev().value_or(0.0)});
  }
  return summary;
}

LogContents read_log(const std::filesystem::path& path) {
  LogContents contents;
  if (!std::filesystem::exists(path)) {
    return contents;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read log " + path.string());
  }
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t start = 0;
  std::size_t line_number = 0;
  while (start < data.size()) {
    ++line_number;
    const auto end = data.find('\n', start);
    const bool terminated = end != std::string::npos;
    const auto line = data.substr(start, (terminated ? end : data.size()) - start);
    const auto next = terminated ? end + 1 : data.size();

    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      contents.valid_bytes = next;
      start = next;
      continue;
    }
    try {
      contents.records.push_back(record_from_json(json::parse(line)));
      contents.valid_bytes = next;
      contents.missing_final_newline = !terminated;
    } catch (const std::exception& error) {
      if (!terminated) {
        contents.torn_tail = true;
        break;
      }
      throw std::runtime_error(path.string() + ":" + std::to_string(line_number) +
                               ": malformed record: " + error.what());
    }
    start = next;
  }
  if (contents.torn_tail) {
    spdlog::warn("{}: ignoring torn final line after {} records", path.string(),
                 contents.records.size());
  }
  return contents;
}

bandit::BanditTable fold_records(const std::vector<ExecutionRecord>& records) {
  bandit::BanditTable table;
  std::uint64_t sequence = 0;
  for (const auto& record : records) {
    ++sequence;
    if (!is_observation(record.outcome)) {
      continue;
    }
    auto& stats = table[record.function].arms[record.environment];
    stats = bandit::update(stats, record.duration);
    stats.last_updated = sequence;
  }
  return table;
}

bandit::BanditTable load_snapshot(const std::filesystem::path& path) {
  return fold_records(read_log(path).records);
}

MetricsStore::MetricsStore(std::set<std::string> environments,
                           std::optional<std::filesystem::path> log_path)
    : environments_(std::move(environments)), log_path_(std::move(log_path)) {
  if (!log_path_) {
    return;
  }
  const auto contents = read_log(*log_path_);
  for (const auto& record : contents.records) {
    ++sequence_;
    auto& shard = shard_for(record.function);
    std::lock_guard lock(shard.mutex);
    apply(shard, record);
  }
  if (contents.torn_tail) {
    std::filesystem::resize_file(*log_path_, contents.valid_bytes);
  }
  if (log_path_->has_parent_path()) {
    std::filesystem::create_directories(log_path_->parent_path());
  }
  file_ = std::fopen(log_path_->c_str(), "ab");
  if (file_ == nullptr) {
    throw std::runtime_error("cannot open log for appending: " + log_path_->string());
  }
  if (contents.missing_final_newline) {
    std::fputc('\n', file_);
    std::fflush(file_);
  }
}

MetricsStore::~MetricsStore() {
  if (file_ != nullptr) {
    std::fclose(file_);
  }
}

MetricsStore::Shard& MetricsStore::shard_for(const std::string& function) {
  {
    std::shared_lock lock(shards_mutex_);
    if (const auto it = shards_.find(function); it != shards_.end()) {
      return *it->second;
    }
  }
  std::unique_lock lock(shards_mutex_);
  auto& slot = shards_[function];
  if (!slot) {
    slot = std::make_unique<Shard>();
  }
  return *slot;
}

const MetricsStore::Shard* MetricsStore::find_shard(const std::string& function) const {
  std::shared_lock lock(shards_mutex_);
  const auto it = shards_.find(function);
  return it == shards_.end() ? nullptr : it->second.get();
}

void MetricsStore::apply(Shard& shard, const ExecutionRecord& record) {
  shard.by_environment[record.environment].push_back(record);
  if (is_observation(record.outcome)) {
    auto& stats = shard.table.arms[record.environment];
    stats = bandit::update(stats, record.duration);
    stats.last_updated = sequence_;
  }
}

void MetricsStore::append_line(const ExecutionRecord& record) {
  if (file_ == nullptr) {
    return;
  }
  const auto line = to_json(record).dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() ||
      std::fflush(file_) != 0) {
    throw std::runtime_error("failed to append to " + log_path_->string());
  }
}

void MetricsStore::insert_duration(const ExecutionRecord& record) {
  if (record.function.empty()) {
    throw std::invalid_argument("record has no function");
  }
  if (!environments_.contains(record.environment)) {
    throw std::invalid_argument("unknown environment: " + record.environment);
  }
  if (!std::isfinite(record.duration) || record.duration < 0.0) {
    throw std::invalid_argument("duration must be finite and non-negative");
  }
  auto stamped = record;
  if (stamped.timestamp.empty()) {
    stamped.timestamp = utc_timestamp_now();
  }

  auto& shard = shard_for(stamped.function);
  std::lock_guard shard_lock(shard.mutex);
  {
    std::lock_guard file_lock(file_mutex_);
    append_line(stamped);
    ++sequence_;
    // Stats are stamped with the log position so a replay reproduces them.
    shard.by_environment[stamped.environment].push_back(stamped);
    if (is_observation(stamped.outcome)) {
      auto& stats = shard.table.arms[stamped.environment];
      stats = bandit::update(stats, stamped.duration);
      stats.last_updated = sequence_;
    }
  }
}

std::vector<ExecutionRecord> MetricsStore::get_duration(const std::string& function,
                                                        const std::string& environment) const {
  const auto* shard = find_shard(function);
  if (shard == nullptr) {
    return {};
  }
  std::lock_guard lock(shard->mutex);
  const auto it = shard->by_environment.find(environment);
  return it == shard->by_environment.end() ? std::vector<ExecutionRecord>{} : it->second;
}

StatsSummary MetricsStore::get_overall_stats() const {
  std::vector<ExecutionRecord> all;
  std::shared_lock lock(shards_mutex_);
  for (const auto& [name, shard] : shards_) {
    std::lock_guard shard_lock(shard->mutex);
    for (const auto& [env, records] : shard->by_environment) {
      all.insert(all.end(), records.begin(), records.end());
    }
  }
  return summarize_records(all);
}

bandit::ArmTable MetricsStore::arm_table(const std::string& function) const {
  const auto* shard = find_shard(function);
  if (shard == nullptr) {
    return {};
  }
  std::lock_guard lock(shard->mutex);
  return shard->table;
}

bandit::BanditTable MetricsStore::bandit_table() const {
  bandit::BanditTable table;
  std::shared_lock lock(shards_mutex_);
  for (const auto& [name, shard] : shards_) {
    std::lock_guard shard_lock(shard->mutex);
    if (!shard->table.arms.empty()) {
      table.emplace(name, shard->table);
    }
  }
  return table;
}

std::size_t MetricsStore::record_count() const {
  std::size_t count = 0;
  std::shared_lock lock(shards_mutex_);
  for (const auto& [name, shard] : shards_) {
    std::lock_guard shard_lock(shard->mutex);
    for (const auto& [env, records] : shard->by_environment) {
      count += records.size();
    }
  }
  return count;
}

} // namespace fogroute::metrics
