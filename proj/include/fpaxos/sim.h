#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fpaxos/multi.h"
#include "fpaxos/quorum.h"
#include "json.hpp"

namespace fpaxos::sim {

using multi::TimeUs;

constexpr TimeUs kMs = 1000;

struct LatencyModel {
  enum class Kind {
    kFixed,          // every link takes fixed_us
    kUniform,        // each message draws from [min_us, max_us]
    kHeterogeneous,  // each link draws once per seed from [min_us, max_us], then stays fixed
  };
  Kind kind = Kind::kFixed;
  TimeUs fixed_us = 10 * kMs;
  TimeUs min_us = 5 * kMs;
  TimeUs max_us = 25 * kMs;
};

std::string_view to_string(LatencyModel::Kind k);
LatencyModel::Kind latency_kind_from_string(std::string_view name);

struct CrashEvent {
  TimeUs at = 0;
  std::uint32_t replica = 0;
  bool lose_memory = false;
};
struct RestoreEvent {
  TimeUs at = 0;
  std::uint32_t replica = 0;
};
// Makes the replica run phase 1; the client follows it.
struct ElectEvent {
  TimeUs at = 0;
  std::uint32_t replica = 0;
};
// Replicas in different groups cannot talk. An empty group list heals.
// Replicas not listed form one extra group.
struct PartitionEvent {
  TimeUs at = 0;
  std::vector<AcceptorSet> groups;
};

struct SimConfig {
  QuorumSystem quorums = make_majority(3, false);
  std::uint64_t seed = 1;
  LatencyModel latency;
  // One-way delay between the client and the replica it talks to.
  std::optional<TimeUs> client_latency_us;
  double loss = 0.0;
  double duplicate = 0.0;

  std::vector<CrashEvent> crashes;
  std::vector<RestoreEvent> restores;
  std::vector<ElectEvent> elections;
  std::vector<PartitionEvent> partitions;
  std::uint32_t initial_leader = 0;

  // Accounted in goodput only. Bandwidth is not modeled, so payloads are
  // not padded to this size.
  std::size_t request_size = 64;
  std::size_t client_window = 10;
  TimeUs client_timeout_us = 1000 * kMs;

  TimeUs duration_us = 120'000 * kMs;
  TimeUs warmup_us = 10'000 * kMs;
  TimeUs cooldown_us = 10'000 * kMs;
  TimeUs tick_us = 50 * kMs;

  multi::TargetStrategy strategy = multi::TargetStrategy::kFixedFirst;
  bool send_to_all = false;
  std::size_t replica_window = 10;
  TimeUs retry_timeout_us = 500 * kMs;

  std::size_t n() const { return quorums.n(); }
  // Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

struct SafetyViolation {
  TimeUs at = 0;
  multi::Slot slot;
  Accepted first;
  Accepted second;
  std::string detail;
};

struct LeaderEvent {
  TimeUs at = 0;
  std::uint32_t replica = 0;
  Ballot ballot;
};

struct RunMetrics {
  std::uint64_t committed_slots = 0;
  std::uint64_t completed_requests = 0;
  std::uint64_t window_completed = 0;
  double window_seconds = 0;
  double throughput = 0;  // completed requests per second inside the steady window
  double mean_latency_ms = 0;
  double median_latency_ms = 0;
  double p99_latency_ms = 0;

  std::map<std::string, std::uint64_t> messages_by_type;
  std::vector<std::uint64_t> sent_per_replica;
  std::vector<std::uint64_t> received_per_replica;
  std::uint64_t dropped = 0;
  std::uint64_t duplicated = 0;

  // Slot-tagged protocol messages per slot decided in the steady window.
  double protocol_msgs_per_commit = 0;
  // Adds the client request and response.
  double msgs_per_commit = 0;

  // (decision time, slot), in decision order.
  std::vector<std::pair<TimeUs, multi::Slot>> decisions;
  std::vector<TimeUs> completions;
  std::vector<LeaderEvent> leader_events;
  std::optional<SafetyViolation> violation;

  std::uint64_t events = 0;

  std::size_t decisions_between(TimeUs from, TimeUs to) const;
  std::size_t completions_between(TimeUs from, TimeUs to) const;
};

// Runs one deterministic world. The trace (JSON lines) is written to `trace`
// when given. A safety violation stops the run and is reported in metrics.
RunMetrics run(const SimConfig& cfg, std::ostream* trace = nullptr);

// Latency matrix the world uses for replica links, in microseconds.
std::vector<std::vector<TimeUs>> link_latencies(const SimConfig& cfg);

nlohmann::ordered_json metrics_to_json(const SimConfig& cfg, const RunMetrics& m);
std::string csv_header();
std::string csv_row(const SimConfig& cfg, const RunMetrics& m);

// Times in the JSON form are milliseconds.
nlohmann::ordered_json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

// Parses "t=5000,r=2[,lose=1]" (t in ms).
CrashEvent parse_crash(std::string_view text);
RestoreEvent parse_restore(std::string_view text);
ElectEvent parse_elect(std::string_view text);
// "t=9000,groups=0.1|2.3" ; "t=9000" alone heals.
PartitionEvent parse_partition(std::string_view text);

// Scripted single-decree executions on four acceptors with two proposers.
struct ScenarioResult {
  std::string name;
  std::vector<std::string> trace;  // JSON lines
  std::vector<std::pair<std::uint32_t, Value>> decisions;  // (proposer, value) learned
  std::map<std::uint32_t, AcceptorState> final_acceptors;
  bool outcome_ok = false;
  std::string outcome;
};

// name is "fig2a" or "fig2b". The quorum system must have four acceptors;
// the default is the even-improved majority.
ScenarioResult scripted_scenario(std::string_view name, std::optional<QuorumSystem> qs = std::nullopt);

}  // namespace fpaxos::sim
