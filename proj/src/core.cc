#include "fpaxos/core.h"

#include <algorithm>
#include <stdexcept>

namespace fpaxos {

std::string Endpoint::to_string() const {
  const char* prefix = "A";
  switch (kind) {
    case Kind::kAcceptor: prefix = "A"; break;
    case Kind::kProposer: prefix = "P"; break;
    case Kind::kReplica: prefix = "R"; break;
    case Kind::kClient: prefix = "C"; break;
  }
  return prefix + std::to_string(index);
}

Endpoint Endpoint::parse(const std::string& text) {
  if (text.size() < 2) throw std::invalid_argument("bad endpoint '" + text + "'");
  Endpoint e;
  switch (text[0]) {
    case 'A': e.kind = Kind::kAcceptor; break;
    case 'P': e.kind = Kind::kProposer; break;
    case 'R': e.kind = Kind::kReplica; break;
    case 'C': e.kind = Kind::kClient; break;
    default: throw std::invalid_argument("bad endpoint '" + text + "'");
  }
  std::size_t used = 0;
  const auto idx = std::stoul(text.substr(1), &used);
  if (used != text.size() - 1) throw std::invalid_argument("bad endpoint '" + text + "'");
  e.index = static_cast<std::uint32_t>(idx);
  return e;
}

std::string_view message_type(const MessageBody& body) {
  struct Visitor {
    std::string_view operator()(const Prepare&) const { return "prepare"; }
    std::string_view operator()(const Promise&) const { return "promise"; }
    std::string_view operator()(const Propose&) const { return "propose"; }
    std::string_view operator()(const Accept&) const { return "accept"; }
    std::string_view operator()(const Nack&) const { return "nack"; }
  };
  return std::visit(Visitor{}, body);
}

AcceptorStep acceptor_handle_prepare(const AcceptorState& st, const Prepare& m, AcceptorId self) {
  if (!st.promised || m.ballot > *st.promised) {
    AcceptorState next = st;
    next.promised = m.ballot;
    return {std::move(next), Promise{m.ballot, st.accepted, self}};
  }
  return {st, Nack{m.ballot, *st.promised, self}};
}

AcceptorStep acceptor_handle_propose(const AcceptorState& st, const Propose& m, AcceptorId self) {
  if (!st.promised || m.ballot >= *st.promised) {
    AcceptorState next;
    next.promised = m.ballot;
    next.accepted = Accepted{m.ballot, m.value};
    return {std::move(next), Accept{m.ballot, self}};
  }
  return {st, Nack{m.ballot, *st.promised, self}};
}

std::string_view to_string(ProposerPhase phase) {
  switch (phase) {
    case ProposerPhase::kIdle: return "idle";
    case ProposerPhase::kPhase1: return "phase1";
    case ProposerPhase::kPhase2: return "phase2";
    case ProposerPhase::kDecided: return "decided";
  }
  return "unknown";
}

ProposerState ProposerState::make(ProposerId id, std::uint64_t round, std::optional<Value> candidate) {
  ProposerState ps;
  ps.ballot = Ballot{round, id};
  ps.candidate_value = std::move(candidate);
  return ps;
}

AcceptorSet ProposerState::promise_set() const {
  AcceptorSet s;
  for (const auto& [a, _] : promises) s.insert(a);
  return s;
}

std::optional<Accepted> highest_accepted(const std::map<AcceptorId, std::optional<Accepted>>& promises) {
  std::optional<Accepted> best;
  for (const auto& [_, acc] : promises) {
    if (acc && (!best || acc->ballot > best->ballot)) best = acc;
  }
  return best;
}

ProposerStep proposer_start(const ProposerState& ps, const QuorumSystem& qs, AcceptorSet targets) {
  if (targets != qs.universe() && !qs.is_q1(targets)) {
    throw std::invalid_argument("prepare targets " + targets.to_string() + " do not contain a phase-1 quorum");
  }
  ProposerStep step{ps, {}};
  step.state.phase = ProposerPhase::kPhase1;
  step.state.promises.clear();
  step.state.accepts = AcceptorSet{};
  step.state.chosen_value.reset();
  const auto src = Endpoint::proposer(ps.ballot.proposer.index);
  for (auto a : targets.members()) {
    step.out.push_back(Message{src, Endpoint::acceptor(a.index), Prepare{ps.ballot}});
  }
  return step;
}

ProposerStep proposer_on_promise(const ProposerState& ps, const QuorumSystem& qs, const Promise& m) {
  ProposerStep step{ps, {}};
  if (ps.phase != ProposerPhase::kPhase1 || m.ballot != ps.ballot) return step;
  auto& st = step.state;
  st.promises[m.from] = m.accepted;
  if (!qs.is_q1(st.promise_set())) return step;

  if (auto prior = highest_accepted(st.promises)) {
    st.chosen_value = prior->value;
  } else if (st.candidate_value) {
    st.chosen_value = st.candidate_value;
  } else {
    // Nothing to propose yet; stay in phase 1 until given a value.
    return step;
  }
  st.phase = ProposerPhase::kPhase2;

  std::vector<AcceptorId> order = st.q2_order;
  if (order.empty()) order = qs.universe().members();
  const auto targets = select_quorum(qs, Phase::kTwo, order);
  if (!targets) throw std::invalid_argument("q2_order cannot form a phase-2 quorum");
  const auto src = Endpoint::proposer(ps.ballot.proposer.index);
  for (auto a : targets->members()) {
    step.out.push_back(Message{src, Endpoint::acceptor(a.index), Propose{st.ballot, *st.chosen_value}});
  }
  return step;
}

ProposerState proposer_on_accept(const ProposerState& ps, const QuorumSystem& qs, const Accept& m) {
  if (ps.phase != ProposerPhase::kPhase2 || m.ballot != ps.ballot) return ps;
  ProposerState next = ps;
  next.accepts.insert(m.from);
  if (qs.is_q2(next.accepts)) next.phase = ProposerPhase::kDecided;
  return next;
}

ProposerState proposer_on_nack(const ProposerState& ps, const Nack& m) {
  ProposerState next = ps;
  next.max_round_seen = std::max(next.max_round_seen, m.promised.round);
  if (m.ballot == ps.ballot && (ps.phase == ProposerPhase::kPhase1 || ps.phase == ProposerPhase::kPhase2)) {
    next.phase = ProposerPhase::kIdle;
  }
  return next;
}

ProposerStep proposer_retry(const ProposerState& ps, const QuorumSystem& qs, AcceptorSet targets) {
  ProposerState next = ps;
  next.ballot.round = std::max(ps.ballot.round, ps.max_round_seen) + 1;
  return proposer_start(next, qs, targets);
}

std::optional<Accepted> Decision::decided() const {
  if (quorums.empty()) return std::nullopt;
  return quorums.front();
}

bool Decision::conflict() const {
  return std::any_of(quorums.begin(), quorums.end(),
                     [this](const Accepted& a) { return a.value != quorums.front().value; });
}

Decision learner_decided(const std::map<AcceptorId, AcceptorState>& acceptors, const QuorumSystem& qs) {
  std::map<Accepted, AcceptorSet> holders;
  for (const auto& [id, st] : acceptors) {
    if (st.accepted) holders[*st.accepted].insert(id);
  }
  Decision d;
  for (const auto& [acc, set] : holders) {
    if (qs.is_q2(set)) d.quorums.push_back(acc);
  }
  return d;
}

nlohmann::ordered_json ballot_to_json(const Ballot& b) {
  return nlohmann::ordered_json::array({b.round, b.proposer.index});
}

Ballot ballot_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("ballot must be [round, proposer]");
  return Ballot{j[0].get<std::uint64_t>(), ProposerId{j[1].get<std::uint32_t>()}};
}

namespace {

nlohmann::ordered_json accepted_to_json(const std::optional<Accepted>& acc) {
  if (!acc) return nullptr;
  nlohmann::ordered_json j;
  j["ballot"] = ballot_to_json(acc->ballot);
  j["value"] = acc->value.bytes;
  return j;
}

std::optional<Accepted> accepted_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Accepted{ballot_from_json(j.at("ballot")), Value{j.at("value").get<std::string>()}};
}

AcceptorId acceptor_of(const Endpoint& e) { return AcceptorId{e.index}; }

}  // namespace

nlohmann::ordered_json to_json(const Message& m) {
  nlohmann::ordered_json j;
  j["type"] = std::string(message_type(m.body));
  std::visit(
      [&j](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        j["ballot"] = ballot_to_json(body.ballot);
        if constexpr (std::is_same_v<T, Propose>) j["value"] = body.value.bytes;
      },
      m.body);
  j["src"] = m.src.to_string();
  j["dst"] = m.dst.to_string();
  if (const auto* p = std::get_if<Promise>(&m.body)) j["accepted"] = accepted_to_json(p->accepted);
  if (const auto* n = std::get_if<Nack>(&m.body)) j["promised"] = ballot_to_json(n->promised);
  return j;
}

Message message_from_json(const nlohmann::json& j) {
  Message m;
  m.src = Endpoint::parse(j.at("src").get<std::string>());
  m.dst = Endpoint::parse(j.at("dst").get<std::string>());
  const auto type = j.at("type").get<std::string>();
  const auto ballot = ballot_from_json(j.at("ballot"));
  if (type == "prepare") {
    m.body = Prepare{ballot};
  } else if (type == "promise") {
    m.body = Promise{ballot, accepted_from_json(j.at("accepted")), acceptor_of(m.src)};
  } else if (type == "propose") {
    m.body = Propose{ballot, Value{j.at("value").get<std::string>()}};
  } else if (type == "accept") {
    m.body = Accept{ballot, acceptor_of(m.src)};
  } else if (type == "nack") {
    m.body = Nack{ballot, ballot_from_json(j.at("promised")), acceptor_of(m.src)};
  } else {
    throw std::invalid_argument("unknown message type '" + type + "'");
  }
  return m;
}

nlohmann::ordered_json to_json(const AcceptorState& st) {
  nlohmann::ordered_json j;
  j["promised"] = st.promised ? ballot_to_json(*st.promised) : nlohmann::ordered_json(nullptr);
  j["accepted"] = accepted_to_json(st.accepted);
  return j;
}

}  // namespace fpaxos
