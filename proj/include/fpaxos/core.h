#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpaxos/quorum.h"
#include "json.hpp"

namespace fpaxos {

struct ProposerId {
  std::uint32_t index = 0;

  friend auto operator<=>(const ProposerId&, const ProposerId&) = default;
};

// Proposal number. Ordered by (round, proposer); a proposer only ever
// issues ballots carrying its own id, so no two proposers share one.
struct Ballot {
  std::uint64_t round = 0;
  ProposerId proposer;

  friend auto operator<=>(const Ballot&, const Ballot&) = default;
};

struct Value {
  std::string bytes;

  friend auto operator<=>(const Value&, const Value&) = default;
};

struct Accepted {
  Ballot ballot;
  Value value;

  friend auto operator<=>(const Accepted&, const Accepted&) = default;
};

// Durable acceptor state. promised and accepted only move up.
struct AcceptorState {
  std::optional<Ballot> promised;
  std::optional<Accepted> accepted;

  friend bool operator==(const AcceptorState&, const AcceptorState&) = default;
};

struct Endpoint {
  enum class Kind : std::uint8_t { kAcceptor, kProposer, kReplica, kClient };
  Kind kind = Kind::kAcceptor;
  std::uint32_t index = 0;

  static Endpoint acceptor(std::uint32_t i) { return {Kind::kAcceptor, i}; }
  static Endpoint proposer(std::uint32_t i) { return {Kind::kProposer, i}; }
  static Endpoint replica(std::uint32_t i) { return {Kind::kReplica, i}; }
  static Endpoint client(std::uint32_t i = 0) { return {Kind::kClient, i}; }

  std::string to_string() const;
  static Endpoint parse(const std::string& text);

  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct Prepare {
  Ballot ballot;
  friend bool operator==(const Prepare&, const Prepare&) = default;
};
struct Promise {
  Ballot ballot;
  std::optional<Accepted> accepted;  // as of promise time
  AcceptorId from;
  friend bool operator==(const Promise&, const Promise&) = default;
};
struct Propose {
  Ballot ballot;
  Value value;
  friend bool operator==(const Propose&, const Propose&) = default;
};
struct Accept {
  Ballot ballot;
  AcceptorId from;
  friend bool operator==(const Accept&, const Accept&) = default;
};
// Rejection of a Prepare or Propose below the acceptor's promise.
struct Nack {
  Ballot ballot;
  Ballot promised;
  AcceptorId from;
  friend bool operator==(const Nack&, const Nack&) = default;
};

using MessageBody = std::variant<Prepare, Promise, Propose, Accept, Nack>;

struct Message {
  Endpoint src;
  Endpoint dst;
  MessageBody body;

  friend bool operator==(const Message&, const Message&) = default;
};

std::string_view message_type(const MessageBody& body);

// --- acceptor -------------------------------------------------------------

struct AcceptorStep {
  AcceptorState state;
  MessageBody reply;  // Promise / Accept on success, Nack otherwise

  bool granted() const { return !std::holds_alternative<Nack>(reply); }
};

AcceptorStep acceptor_handle_prepare(const AcceptorState& st, const Prepare& m, AcceptorId self);
AcceptorStep acceptor_handle_propose(const AcceptorState& st, const Propose& m, AcceptorId self);

// --- proposer -------------------------------------------------------------

enum class ProposerPhase { kIdle, kPhase1, kPhase2, kDecided };

std::string_view to_string(ProposerPhase phase);

struct ProposerState {
  Ballot ballot;
  ProposerPhase phase = ProposerPhase::kIdle;
  std::map<AcceptorId, std::optional<Accepted>> promises;
  AcceptorSet accepts;
  std::optional<Value> chosen_value;
  std::optional<Value> candidate_value;
  // Order in which acceptors are tried for the phase-2 quorum. Empty means
  // ascending acceptor index.
  std::vector<AcceptorId> q2_order;
  // Largest round observed in a Nack; seeds the next retry.
  std::uint64_t max_round_seen = 0;

  static ProposerState make(ProposerId id, std::uint64_t round, std::optional<Value> candidate);
  AcceptorSet promise_set() const;
};

struct ProposerStep {
  ProposerState state;
  std::vector<Message> out;
};

// Throws std::invalid_argument unless targets is a Q1 or the full universe.
ProposerStep proposer_start(const ProposerState& ps, const QuorumSystem& qs, AcceptorSet targets);
// Stale promises (wrong ballot or phase) are ignored.
ProposerStep proposer_on_promise(const ProposerState& ps, const QuorumSystem& qs, const Promise& m);
ProposerState proposer_on_accept(const ProposerState& ps, const QuorumSystem& qs, const Accept& m);
// A Nack for the current ballot abandons it; the proposer goes idle.
ProposerState proposer_on_nack(const ProposerState& ps, const Nack& m);
// Fresh phase 1 at round max(ballot.round, max_round_seen) + 1.
ProposerStep proposer_retry(const ProposerState& ps, const QuorumSystem& qs, AcceptorSet targets);

// Value-choice rule for phase 2: the value of the highest-ballot accepted
// pair among the promises, if any.
std::optional<Accepted> highest_accepted(const std::map<AcceptorId, std::optional<Accepted>>& promises);

// --- learner --------------------------------------------------------------

struct Decision {
  // Every (ballot, value) held by a full Q2, ascending by ballot.
  std::vector<Accepted> quorums;

  // Lowest-ballot decision, if any.
  std::optional<Accepted> decided() const;
  // Two quorums disagree on the value: a safety violation.
  bool conflict() const;
};

Decision learner_decided(const std::map<AcceptorId, AcceptorState>& acceptors, const QuorumSystem& qs);

// --- serialization --------------------------------------------------------

nlohmann::ordered_json ballot_to_json(const Ballot& b);
Ballot ballot_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AcceptorState& st);

}  // namespace fpaxos
