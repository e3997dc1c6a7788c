#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "fpaxos/core.h"
#include "fpaxos/quorum.h"
#include "json.hpp"

namespace fpaxos::multi {

struct Slot {
  std::uint64_t index = 0;

  Slot next() const { return Slot{index + 1}; }
  friend auto operator<=>(const Slot&, const Slot&) = default;
};

using TimeUs = std::int64_t;

// Aggregated phase 1: covers every slot >= from.
struct Prepare {
  Ballot ballot;
  Slot from;
  friend bool operator==(const Prepare&, const Prepare&) = default;
};
struct SlotAccepted {
  Slot slot;
  Accepted accepted;
  friend bool operator==(const SlotAccepted&, const SlotAccepted&) = default;
};
struct Promise {
  Ballot ballot;
  Slot from;
  std::vector<SlotAccepted> accepted;  // every accepted pair at slots >= from
  AcceptorId sender;
  friend bool operator==(const Promise&, const Promise&) = default;
};
// commit_through: every slot below it is decided at the sender. Acceptors
// holding a pair accepted at this ballot for such a slot learn it.
struct Propose {
  Ballot ballot;
  Slot slot;
  Value value;
  Slot commit_through;
  friend bool operator==(const Propose&, const Propose&) = default;
};
struct Accept {
  Ballot ballot;
  Slot slot;
  AcceptorId sender;
  friend bool operator==(const Accept&, const Accept&) = default;
};
struct Nack {
  Ballot ballot;
  Ballot promised;
  std::optional<Slot> slot;
  AcceptorId sender;
  friend bool operator==(const Nack&, const Nack&) = default;
};

struct ClientRequest {
  std::uint64_t id = 0;
  Value payload;
  friend bool operator==(const ClientRequest&, const ClientRequest&) = default;
};
struct ClientResponse {
  std::uint64_t id = 0;
  Slot slot;
  Value payload;
  friend bool operator==(const ClientResponse&, const ClientResponse&) = default;
};

enum class RejectReason { kNotLeader, kBackpressure };

struct ClientReject {
  std::uint64_t id = 0;
  RejectReason reason = RejectReason::kNotLeader;
  friend bool operator==(const ClientReject&, const ClientReject&) = default;
};

using MessageBody =
    std::variant<Prepare, Promise, Propose, Accept, Nack, ClientRequest, ClientResponse, ClientReject>;

struct Message {
  Endpoint src;
  Endpoint dst;
  MessageBody body;
  friend bool operator==(const Message&, const Message&) = default;
};

std::string_view message_type(const MessageBody& body);
bool is_protocol_message(const MessageBody& body);
// The slot a phase-2 message belongs to, if any.
std::optional<Slot> message_slot(const MessageBody& body);

// Empty payload marks a no-op used to fill log gaps during recovery.
inline bool is_noop(const Value& v) { return v.bytes.empty(); }

enum class TargetStrategy { kFixedFirst, kRotating, kRandom, kFastest };

std::string_view to_string(TargetStrategy s);
TargetStrategy target_strategy_from_string(std::string_view name);

struct ReplicaOptions {
  std::size_t window = 10;
  TargetStrategy strategy = TargetStrategy::kFixedFirst;
  // Send phase-1 and phase-2 messages to every acceptor instead of a quorum.
  bool send_to_all = false;
  // Acceptor order for kFastest (nearest first). Ignored by the others.
  std::vector<AcceptorId> nearest;
  std::uint64_t seed = 0;
  TimeUs retry_timeout_us = 500'000;
};

enum class Role { kFollower, kCandidate, kLeader };

std::string_view to_string(Role r);

enum class SubmitStatus { kAccepted, kQueued, kNotLeader, kBackpressure, kDuplicate };

struct Output {
  std::vector<Message> messages;
  // Slots this replica learned as decided during the step.
  std::vector<Slot> decided;
  bool became_leader = false;
  bool stepped_down = false;
  std::vector<std::string> notes;

  void append(Output&& other);
};

struct SubmitResult {
  SubmitStatus status = SubmitStatus::kAccepted;
  Output out;
};

// One Multi-Paxos replica: acceptor, learner and (when elected) leader.
// Leader election is triggered from outside via become_leader().
class Replica {
 public:
  Replica(AcceptorId id, QuorumSystem qs, ReplicaOptions options = {});

  AcceptorId id() const { return id_; }
  Endpoint endpoint() const { return Endpoint::replica(id_.index); }
  const QuorumSystem& quorums() const { return qs_; }
  const ReplicaOptions& options() const { return options_; }

  Role role() const { return role_; }
  bool is_leader() const { return role_ == Role::kLeader; }
  const Ballot& ballot() const { return ballot_; }

  // Acceptor view.
  const std::optional<Ballot>& promised() const { return promised_; }
  const std::map<Slot, AcceptorState>& slots() const { return slots_; }
  AcceptorState slot_state(Slot s) const;

  // Learner view: decided entries only.
  const std::map<Slot, Accepted>& log() const { return log_; }
  Slot commit_through() const { return commit_through_; }
  Slot next_slot() const { return next_slot_; }
  std::size_t open_client_slots() const { return open_client_slots_; }
  std::size_t pending_requests() const { return pending_.size(); }

  Output become_leader(TimeUs now);
  SubmitResult submit(const ClientRequest& req, TimeUs now);
  Output on_message(const Message& m, TimeUs now);
  Output on_tick(TimeUs now);

  // Crash recovery. With lose_memory the replica restarts from scratch;
  // otherwise acceptor and learner state survive and leadership is dropped.
  void restart(bool lose_memory);

 private:
  struct Inflight {
    Value value;
    std::optional<std::uint64_t> request_id;
    AcceptorSet targets;
    AcceptorSet accepts;
    TimeUs sent_at = 0;
  };

  Output handle_prepare(const Endpoint& src, const Prepare& m);
  Output handle_promise(const Promise& m, TimeUs now);
  Output handle_propose(const Endpoint& src, const Propose& m);
  Output handle_accept(const Accept& m, TimeUs now);
  Output handle_nack(const Nack& m, TimeUs now);

  Output start_phase1(TimeUs now);
  Output finish_phase1(TimeUs now);
  Output propose(Slot slot, Value value, std::optional<std::uint64_t> request_id, TimeUs now);
  Output drain_pending(TimeUs now);
  void learn(Slot slot, const Accepted& acc, Output& out);
  void step_down(Output& out, const std::string& why);

  std::vector<AcceptorId> preference(Phase phase, Slot slot) const;
  AcceptorSet choose_targets(Phase phase, Slot slot) const;
  Message to_acceptor(AcceptorId a, MessageBody body) const;

  AcceptorId id_;
  QuorumSystem qs_;
  ReplicaOptions options_;

  // Acceptor (durable).
  std::optional<Ballot> promised_;
  std::map<Slot, AcceptorState> slots_;
  std::set<Slot> unlearned_;

  // Learner (durable).
  std::map<Slot, Accepted> log_;
  Slot commit_through_;

  // Proposer / leader (volatile).
  Role role_ = Role::kFollower;
  Ballot ballot_;
  std::uint64_t max_round_seen_ = 0;
  Slot from_slot_;
  AcceptorSet promises_;
  AcceptorSet prepare_targets_;
  TimeUs phase1_sent_at_ = 0;
  std::optional<TimeUs> retry_election_at_;
  std::map<Slot, Accepted> recovered_;
  std::map<Slot, Inflight> inflight_;
  Slot next_slot_;
  std::size_t open_client_slots_ = 0;
  std::deque<ClientRequest> pending_;
  std::unordered_set<std::uint64_t> known_requests_;
  AcceptorSet suspected_;
};

nlohmann::ordered_json to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);
// JSON array of {slot, ballot, value}.
nlohmann::ordered_json log_to_json(const std::map<Slot, Accepted>& log);

}  // namespace fpaxos::multi
