#pragma once

// Append-only execution log and the live bandit table derived from it.

#include "fogroute/bandit.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace fogroute::metrics {

enum class Outcome { success, remote_failure_then_fallback, failure };

[[nodiscard]] std::string_view to_string(Outcome outcome);
[[nodiscard]] Outcome parse_outcome(std::string_view name);

/// True when the record is a completed execution whose duration describes
/// the environment that served it.
[[nodiscard]] bool is_observation(Outcome outcome);

struct ExecutionRecord {
  std::string function;
  std::string environment;
  double duration = 0.0; // seconds, end to end as seen by the proxy
  std::string timestamp; // ISO-8601 UTC
  Outcome outcome = Outcome::success;

  friend bool operator==(const ExecutionRecord&, const ExecutionRecord&) = default;
};

[[nodiscard]] std::string utc_timestamp_now();

[[nodiscard]] nlohmann::ordered_json to_json(const ExecutionRecord& record);
/// Accepts "duration" in seconds or "duration_ms"; throws on malformed input.
[[nodiscard]] ExecutionRecord record_from_json(const nlohmann::json& item);

struct StatsEntry {
  std::string function;
  std::string environment;
  std::uint64_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0; // sample standard deviation, 0 for a single record
};

using StatsSummary = std::vector<StatsEntry>;

[[nodiscard]] nlohmann::ordered_json to_json(const StatsSummary& summary);

/// Raw summary over a record list, used by the store and by tests.
[[nodiscard]] StatsSummary summarize_records(const std::vector<ExecutionRecord>& records);

/// Contents of a log file. A final line without a terminating newline that
/// does not parse is dropped and reported as torn.
struct LogContents {
  std::vector<ExecutionRecord> records;
  bool torn_tail = false;
  bool missing_final_newline = false;
  std::uintmax_t valid_bytes = 0;
};

/// Throws std::runtime_error when the file is unreadable or a line other
/// than the last is malformed. A missing file reads as empty.
[[nodiscard]] LogContents read_log(const std::filesystem::path& path);

/// Folds every observation in the log into a bandit table.
[[nodiscard]] bandit::BanditTable load_snapshot(const std::filesystem::path& path);

[[nodiscard]] bandit::BanditTable fold_records(const std::vector<ExecutionRecord>& records);

class MetricsStore {
public:
  /// Without a path the store is memory only. With a path, existing records
  /// are replayed and a torn final line is cut off before appending resumes.
  MetricsStore(std::set<std::string> environments,
               std::optional<std::filesystem::path> log_path = std::nullopt);
  ~MetricsStore();

  MetricsStore(const MetricsStore&) = delete;
  MetricsStore& operator=(const MetricsStore&) = delete;

  /// Validates, appends to the log and updates the arm, all under the
  /// function's lock. Throws std::invalid_argument on validation failure and
  /// std::runtime_error on I/O failure.
  void insert_duration(const ExecutionRecord& record);

  [[nodiscard]] std::vector<ExecutionRecord> get_duration(const std::string& function,
                                                          const std::string& environment) const;
  [[nodiscard]] StatsSummary get_overall_stats() const;

  [[nodiscard]] bandit::ArmTable arm_table(const std::string& function) const;
  [[nodiscard]] bandit::BanditTable bandit_table() const;
  [[nodiscard]] std::size_t record_count() const;

  [[nodiscard]] const std::optional<std::filesystem::path>& log_path() const { return log_path_; }

private:
  struct Shard {
    mutable std::mutex mutex;
    std::map<std::string, std::vector<ExecutionRecord>> by_environment;
    bandit::ArmTable table;
  };

  Shard& shard_for(const std::string& function);
  const Shard* find_shard(const std::string& function) const;
  void apply(Shard& shard, const ExecutionRecord& record);
  void append_line(const ExecutionRecord& record);

  std::set<std::string> environments_;
  std::optional<std::filesystem::path> log_path_;

  mutable std::shared_mutex shards_mutex_;
  std::map<std::string, std::unique_ptr<Shard>> shards_;

  std::mutex file_mutex_;
  std::FILE* file_ = nullptr;
  std::uint64_t sequence_ = 0;
};

} // namespace fogroute::metrics
