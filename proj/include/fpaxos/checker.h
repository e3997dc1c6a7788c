#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpaxos/core.h"
#include "fpaxos/quorum.h"
#include "json.hpp"

namespace fpaxos::checker {

struct CheckConfig {
  QuorumSystem quorums = make_majority(3, false);
  // Ballots 1..ballots; ballot b belongs to proposer (b - 1) % proposers.
  std::uint32_t ballots = 2;
  std::uint32_t values = 2;
  std::uint32_t proposers = 2;
  // Number of times an acceptor may lose its state. Zero models durable
  // storage.
  std::uint32_t amnesia = 0;
  // Canonicalize states under value renaming, and under acceptor renaming
  // when the quorum system is a threshold system.
  bool symmetry = false;
  std::uint64_t max_states = 5'000'000;

  // Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

enum class ActionKind : std::uint8_t { kPhase1a, kPhase1b, kPhase2a, kPhase2b, kAmnesia };

std::string_view to_string(ActionKind k);

struct Action {
  ActionKind kind = ActionKind::kPhase1a;
  std::uint32_t acceptor = 0;  // phase1b, phase2b, amnesia
  std::uint32_t ballot = 0;    // round number, 1-based
  std::uint32_t value = 0;     // phase2a, phase2b
  AcceptorSet quorum;          // phase2a: the Q1 whose promises fixed the value

  friend bool operator==(const Action&, const Action&) = default;
};

enum class Property : std::uint8_t {
  kAgreement,  // two different values decided
  kProposal,   // a proposal above a decided ballot carries a different value
};

std::string_view to_string(Property p);

struct Counterexample {
  Property property = Property::kAgreement;
  std::vector<Action> path;
  std::string detail;
};

struct CheckResult {
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint32_t depth = 0;
  bool complete = true;
  // Shallowest counterexample found for each violated property.
  std::vector<Counterexample> violations;

  bool safe() const { return violations.empty(); }
  const Counterexample* find(Property p) const;
};

// Breadth-first search over all interleavings of the single-decree protocol
// with a monotone set of sent messages. Stops early once agreement fails.
CheckResult explore(const CheckConfig& cfg);

// Raised when the core transition functions disagree with the checker.
class ReplayDivergence : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ReplayState {
  std::map<AcceptorId, AcceptorState> acceptors;
  std::vector<Message> sent;
  // Every distinct decision the learner reported along the path.
  std::vector<Accepted> decisions;

  bool conflicting() const;
};

// Re-runs a path through the core acceptor, proposer and learner functions.
ReplayState replay(const CheckConfig& cfg, const std::vector<Action>& path);

Value value_name(std::uint32_t v);
Ballot ballot_of(const CheckConfig& cfg, std::uint32_t round);

nlohmann::ordered_json to_json(const CheckConfig& cfg, const Action& a);
// One JSON line per action followed by a "violation" line.
std::string counterexample_jsonl(const CheckConfig& cfg, const Counterexample& cx);
nlohmann::ordered_json to_json(const CheckResult& r);

// Keys: quorums, ballots, values, proposers, amnesia, symmetry, max_states.
CheckConfig check_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const CheckConfig& cfg);

struct SweepEntry {
  std::string name;
  QuorumSystem quorums;
  bool intersects = false;
  CheckResult result;

  // Agreement fails exactly when the phases fail to intersect.
  bool consistent() const { return result.complete && intersects == result.safe(); }
};

// Catalog for 2 <= n <= n_max: every shipped constructor plus threshold
// families whose phases can miss each other.
std::vector<std::pair<std::string, QuorumSystem>> sweep_catalog(std::size_t n_max);
std::vector<SweepEntry> quorum_safety_sweep(std::size_t n_max, std::uint32_t ballots = 2, std::uint32_t values = 2);

}  // namespace fpaxos::checker
