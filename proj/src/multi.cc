#include "fpaxos/multi.h"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace fpaxos::multi {

std::string_view message_type(const MessageBody& body) {
  struct Visitor {
    std::string_view operator()(const Prepare&) const { return "prepare"; }
    std::string_view operator()(const Promise&) const { return "promise"; }
    std::string_view operator()(const Propose&) const { return "propose"; }
    std::string_view operator()(const Accept&) const { return "accept"; }
    std::string_view operator()(const Nack&) const { return "nack"; }
    std::string_view operator()(const ClientRequest&) const { return "request"; }
    std::string_view operator()(const ClientResponse&) const { return "response"; }
    std::string_view operator()(const ClientReject&) const { return "reject"; }
  };
  return std::visit(Visitor{}, body);
}

bool is_protocol_message(const MessageBody& body) {
  return !std::holds_alternative<ClientRequest>(body) && !std::holds_alternative<ClientResponse>(body) &&
         !std::holds_alternative<ClientReject>(body);
}

std::optional<Slot> message_slot(const MessageBody& body) {
  if (const auto* p = std::get_if<Propose>(&body)) return p->slot;
  if (const auto* a = std::get_if<Accept>(&body)) return a->slot;
  if (const auto* n = std::get_if<Nack>(&body)) return n->slot;
  return std::nullopt;
}

std::string_view to_string(TargetStrategy s) {
  switch (s) {
    case TargetStrategy::kFixedFirst: return "fixed-first";
    case TargetStrategy::kRotating: return "rotating";
    case TargetStrategy::kRandom: return "random";
    case TargetStrategy::kFastest: return "fastest";
  }
  return "unknown";
}

TargetStrategy target_strategy_from_string(std::string_view name) {
  for (auto s : {TargetStrategy::kFixedFirst, TargetStrategy::kRotating, TargetStrategy::kRandom,
                 TargetStrategy::kFastest}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown target strategy '" + std::string(name) + "'");
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kFollower: return "follower";
    case Role::kCandidate: return "candidate";
    case Role::kLeader: return "leader";
  }
  return "unknown";
}

void Output::append(Output&& other) {
  for (auto& m : other.messages) messages.push_back(std::move(m));
  decided.insert(decided.end(), other.decided.begin(), other.decided.end());
  became_leader = became_leader || other.became_leader;
  stepped_down = stepped_down || other.stepped_down;
  for (auto& n : other.notes) notes.push_back(std::move(n));
}

Replica::Replica(AcceptorId id, QuorumSystem qs, ReplicaOptions options)
    : id_(id), qs_(std::move(qs)), options_(std::move(options)) {
  if (id_.index >= qs_.n()) throw std::invalid_argument("replica id outside the quorum universe");
  if (options_.window == 0) throw std::invalid_argument("window must be positive");
  for (auto a : options_.nearest) {
    if (a.index >= qs_.n()) throw std::invalid_argument("nearest-acceptor order names unknown acceptor");
  }
  ballot_ = Ballot{0, ProposerId{id_.index}};
}

AcceptorState Replica::slot_state(Slot s) const {
  AcceptorState st;
  if (auto it = slots_.find(s); it != slots_.end()) st = it->second;
  if (promised_ && (!st.promised || *st.promised < *promised_)) st.promised = promised_;
  return st;
}

std::vector<AcceptorId> Replica::preference(Phase phase, Slot slot) const {
  const auto n = static_cast<std::uint32_t>(qs_.n());
  std::vector<AcceptorId> order;
  order.reserve(n);
  switch (options_.strategy) {
    case TargetStrategy::kFixedFirst:
      for (std::uint32_t i = 0; i < n; ++i) order.push_back(AcceptorId{i});
      break;
    case TargetStrategy::kRotating: {
      const auto shift = phase == Phase::kOne ? 0 : static_cast<std::uint32_t>(slot.index % n);
      for (std::uint32_t i = 0; i < n; ++i) order.push_back(AcceptorId{(i + shift) % n});
      break;
    }
    case TargetStrategy::kRandom: {
      for (std::uint32_t i = 0; i < n; ++i) order.push_back(AcceptorId{i});
      std::mt19937_64 rng(options_.seed ^ (slot.index * 0x9E3779B97F4A7C15ULL) ^ (phase == Phase::kOne ? 1 : 0));
      for (std::uint32_t i = n; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
      }
      break;
    }
    case TargetStrategy::kFastest:
      order = options_.nearest;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (std::find(order.begin(), order.end(), AcceptorId{i}) == order.end()) order.push_back(AcceptorId{i});
      }
      break;
  }
  std::stable_partition(order.begin(), order.end(), [this](AcceptorId a) { return !suspected_.contains(a); });
  return order;
}

AcceptorSet Replica::choose_targets(Phase phase, Slot slot) const {
  if (options_.send_to_all) return qs_.universe();
  const auto order = preference(phase, slot);
  return select_quorum(qs_, phase, order).value_or(qs_.universe());
}

Message Replica::to_acceptor(AcceptorId a, MessageBody body) const {
  return Message{endpoint(), Endpoint::replica(a.index), std::move(body)};
}

Output Replica::become_leader(TimeUs now) {
  Output out;
  std::uint64_t round = std::max(ballot_.round, max_round_seen_);
  if (promised_) round = std::max(round, promised_->round);
  ballot_ = Ballot{round + 1, ProposerId{id_.index}};
  role_ = Role::kCandidate;
  retry_election_at_.reset();
  from_slot_ = commit_through_;
  promises_ = AcceptorSet{};
  recovered_.clear();
  inflight_.clear();
  open_client_slots_ = 0;
  known_requests_.clear();
  for (const auto& r : pending_) known_requests_.insert(r.id);
  out.notes.push_back("election at round " + std::to_string(ballot_.round));
  out.append(start_phase1(now));
  return out;
}

Output Replica::start_phase1(TimeUs now) {
  Output out;
  prepare_targets_ = choose_targets(Phase::kOne, Slot{0});
  phase1_sent_at_ = now;
  for (auto a : prepare_targets_.members()) out.messages.push_back(to_acceptor(a, Prepare{ballot_, from_slot_}));
  return out;
}

SubmitResult Replica::submit(const ClientRequest& req, TimeUs now) {
  SubmitResult res;
  if (role_ == Role::kFollower) {
    res.status = SubmitStatus::kNotLeader;
    return res;
  }
  if (known_requests_.contains(req.id)) {
    res.status = SubmitStatus::kDuplicate;
    return res;
  }
  if (role_ == Role::kCandidate) {
    pending_.push_back(req);
    known_requests_.insert(req.id);
    res.status = SubmitStatus::kQueued;
    return res;
  }
  if (open_client_slots_ >= options_.window) {
    res.status = SubmitStatus::kBackpressure;
    return res;
  }
  known_requests_.insert(req.id);
  const Slot slot = next_slot_;
  next_slot_ = next_slot_.next();
  res.out = propose(slot, req.payload, req.id, now);
  res.status = SubmitStatus::kAccepted;
  return res;
}

Output Replica::propose(Slot slot, Value value, std::optional<std::uint64_t> request_id, TimeUs now) {
  Output out;
  Inflight entry;
  entry.value = std::move(value);
  entry.request_id = request_id;
  entry.targets = choose_targets(Phase::kTwo, slot);
  entry.sent_at = now;
  if (request_id) ++open_client_slots_;
  for (auto a : entry.targets.members()) {
    out.messages.push_back(to_acceptor(a, Propose{ballot_, slot, entry.value, commit_through_}));
  }
  inflight_[slot] = std::move(entry);
  return out;
}

Output Replica::drain_pending(TimeUs now) {
  Output out;
  while (role_ == Role::kLeader && !pending_.empty() && open_client_slots_ < options_.window) {
    auto req = std::move(pending_.front());
    pending_.pop_front();
    const Slot slot = next_slot_;
    next_slot_ = next_slot_.next();
    out.append(propose(slot, std::move(req.payload), req.id, now));
  }
  return out;
}

Output Replica::on_message(const Message& m, TimeUs now) {
  Output out;
  if (m.dst != endpoint()) {
    out.notes.push_back("dropped message addressed to " + m.dst.to_string());
    return out;
  }
  if (is_protocol_message(m.body)) {
    if (m.src.kind != Endpoint::Kind::kReplica || m.src.index >= qs_.n()) {
      out.notes.push_back("dropped protocol message from " + m.src.to_string());
      return out;
    }
    suspected_.erase(AcceptorId{m.src.index});
  }
  struct Visitor {
    Replica& self;
    const Message& m;
    TimeUs now;
    Output operator()(const Prepare& p) { return self.handle_prepare(m.src, p); }
    Output operator()(const Promise& p) {
      if (p.sender.index != m.src.index) return malformed();
      return self.handle_promise(p, now);
    }
    Output operator()(const Propose& p) { return self.handle_propose(m.src, p); }
    Output operator()(const Accept& a) {
      if (a.sender.index != m.src.index) return malformed();
      return self.handle_accept(a, now);
    }
    Output operator()(const Nack& n) {
      if (n.sender.index != m.src.index) return malformed();
      return self.handle_nack(n, now);
    }
    Output operator()(const ClientRequest& r) {
      auto res = self.submit(r, now);
      if (res.status == SubmitStatus::kNotLeader || res.status == SubmitStatus::kBackpressure) {
        const auto reason =
            res.status == SubmitStatus::kNotLeader ? RejectReason::kNotLeader : RejectReason::kBackpressure;
        res.out.messages.push_back(Message{self.endpoint(), m.src, ClientReject{r.id, reason}});
      }
      return std::move(res.out);
    }
    Output operator()(const ClientResponse&) { return malformed(); }
    Output operator()(const ClientReject&) { return malformed(); }
    Output malformed() {
      Output o;
      o.notes.push_back("dropped malformed " + std::string(message_type(m.body)) + " from " + m.src.to_string());
      return o;
    }
  };
  return std::visit(Visitor{*this, m, now}, m.body);
}

Output Replica::handle_prepare(const Endpoint& src, const Prepare& m) {
  Output out;
  max_round_seen_ = std::max(max_round_seen_, m.ballot.round);
  const auto step = acceptor_handle_prepare(AcceptorState{promised_, std::nullopt}, fpaxos::Prepare{m.ballot}, id_);
  if (!step.granted()) {
    out.messages.push_back(Message{endpoint(), src, Nack{m.ballot, *promised_, std::nullopt, id_}});
    return out;
  }
  promised_ = step.state.promised;
  Promise reply{m.ballot, m.from, {}, id_};
  for (auto it = slots_.lower_bound(m.from); it != slots_.end(); ++it) {
    if (it->second.accepted) reply.accepted.push_back(SlotAccepted{it->first, *it->second.accepted});
  }
  out.messages.push_back(Message{endpoint(), src, std::move(reply)});
  return out;
}

Output Replica::handle_propose(const Endpoint& src, const Propose& m) {
  Output out;
  max_round_seen_ = std::max(max_round_seen_, m.ballot.round);
  const auto step = acceptor_handle_propose(slot_state(m.slot), fpaxos::Propose{m.ballot, m.value}, id_);
  if (!step.granted()) {
    out.messages.push_back(Message{endpoint(), src, Nack{m.ballot, *step.state.promised, m.slot, id_}});
    return out;
  }
  slots_[m.slot] = step.state;
  if (!promised_ || *promised_ < m.ballot) promised_ = m.ballot;
  if (!log_.contains(m.slot)) unlearned_.insert(m.slot);
  out.messages.push_back(Message{endpoint(), src, Accept{m.ballot, m.slot, id_}});

  std::vector<Slot> learnable;
  for (auto it = unlearned_.begin(); it != unlearned_.end() && *it < m.commit_through; ++it) {
    const auto& acc = slots_.at(*it).accepted;
    if (acc && acc->ballot == m.ballot) learnable.push_back(*it);
  }
  for (auto s : learnable) learn(s, *slots_.at(s).accepted, out);
  return out;
}

Output Replica::handle_promise(const Promise& m, TimeUs now) {
  Output out;
  if (role_ != Role::kCandidate || m.ballot != ballot_) return out;
  promises_.insert(m.sender);
  for (const auto& sa : m.accepted) {
    if (sa.slot < from_slot_) continue;
    auto it = recovered_.find(sa.slot);
    if (it == recovered_.end() || it->second.ballot < sa.accepted.ballot) recovered_[sa.slot] = sa.accepted;
  }
  if (qs_.is_q1(promises_)) out.append(finish_phase1(now));
  return out;
}

Output Replica::finish_phase1(TimeUs now) {
  Output out;
  role_ = Role::kLeader;
  out.became_leader = true;
  out.notes.push_back("leader at round " + std::to_string(ballot_.round));
  Slot end = from_slot_;
  if (!recovered_.empty()) end = std::max(end, recovered_.rbegin()->first.next());
  if (!log_.empty()) end = std::max(end, log_.rbegin()->first.next());
  next_slot_ = end;
  for (Slot s = from_slot_; s < end; s = s.next()) {
    if (log_.contains(s)) continue;
    auto it = recovered_.find(s);
    out.append(propose(s, it != recovered_.end() ? it->second.value : Value{}, std::nullopt, now));
  }
  recovered_.clear();
  out.append(drain_pending(now));
  return out;
}

Output Replica::handle_accept(const Accept& m, TimeUs now) {
  Output out;
  if (role_ != Role::kLeader || m.ballot != ballot_) return out;
  auto it = inflight_.find(m.slot);
  if (it == inflight_.end()) return out;
  it->second.accepts.insert(m.sender);
  if (!qs_.is_q2(it->second.accepts)) return out;

  Inflight done = std::move(it->second);
  inflight_.erase(it);
  learn(m.slot, Accepted{ballot_, done.value}, out);
  if (done.request_id) {
    --open_client_slots_;
    known_requests_.erase(*done.request_id);
    out.messages.push_back(Message{endpoint(), Endpoint::client(), ClientResponse{*done.request_id, m.slot, done.value}});
  }
  out.append(drain_pending(now));
  return out;
}

Output Replica::handle_nack(const Nack& m, TimeUs now) {
  Output out;
  max_round_seen_ = std::max(max_round_seen_, m.promised.round);
  if (m.ballot != ballot_ || role_ == Role::kFollower) return out;
  if (role_ == Role::kCandidate) {
    step_down(out, "election preempted at round " + std::to_string(m.promised.round));
    retry_election_at_ = now + options_.retry_timeout_us;
    return out;
  }
  step_down(out, "leadership preempted at round " + std::to_string(m.promised.round));
  pending_.clear();
  known_requests_.clear();
  return out;
}

void Replica::step_down(Output& out, const std::string& why) {
  role_ = Role::kFollower;
  inflight_.clear();
  open_client_slots_ = 0;
  promises_ = AcceptorSet{};
  recovered_.clear();
  out.stepped_down = true;
  out.notes.push_back(why);
}

Output Replica::on_tick(TimeUs now) {
  Output out;
  if (retry_election_at_ && now >= *retry_election_at_) return become_leader(now);
  const auto universe = qs_.universe();
  if (role_ == Role::kCandidate && now - phase1_sent_at_ >= options_.retry_timeout_us) {
    suspected_ = suspected_ | (prepare_targets_ - promises_);
    prepare_targets_ = universe;
    phase1_sent_at_ = now;
    for (auto a : (universe - promises_).members()) out.messages.push_back(to_acceptor(a, Prepare{ballot_, from_slot_}));
  }
  if (role_ == Role::kLeader) {
    for (auto& [slot, entry] : inflight_) {
      if (now - entry.sent_at < options_.retry_timeout_us) continue;
      suspected_ = suspected_ | (entry.targets - entry.accepts);
      entry.targets = universe;
      entry.sent_at = now;
      for (auto a : (universe - entry.accepts).members()) {
        out.messages.push_back(to_acceptor(a, Propose{ballot_, slot, entry.value, commit_through_}));
      }
    }
  }
  return out;
}

void Replica::learn(Slot slot, const Accepted& acc, Output& out) {
  unlearned_.erase(slot);
  auto [it, inserted] = log_.emplace(slot, acc);
  if (!inserted) {
    if (it->second.value != acc.value) out.notes.push_back("conflicting decision at slot " + std::to_string(slot.index));
    return;
  }
  out.decided.push_back(slot);
  while (log_.contains(commit_through_)) commit_through_ = commit_through_.next();
}

void Replica::restart(bool lose_memory) {
  if (lose_memory) {
    *this = Replica(id_, qs_, options_);
    return;
  }
  role_ = Role::kFollower;
  promises_ = AcceptorSet{};
  prepare_targets_ = AcceptorSet{};
  retry_election_at_.reset();
  recovered_.clear();
  inflight_.clear();
  open_client_slots_ = 0;
  pending_.clear();
  known_requests_.clear();
  suspected_ = AcceptorSet{};
}

namespace {

nlohmann::ordered_json slot_accepted_to_json(const SlotAccepted& sa) {
  nlohmann::ordered_json j;
  j["slot"] = sa.slot.index;
  j["ballot"] = ballot_to_json(sa.accepted.ballot);
  j["value"] = sa.accepted.value.bytes;
  return j;
}

std::string_view reason_name(RejectReason r) { return r == RejectReason::kNotLeader ? "not-leader" : "backpressure"; }

}  // namespace

nlohmann::ordered_json to_json(const Message& m) {
  nlohmann::ordered_json j;
  j["type"] = std::string(message_type(m.body));
  struct Visitor {
    nlohmann::ordered_json& j;
    const Message& m;
    void endpoints() {
      j["src"] = m.src.to_string();
      j["dst"] = m.dst.to_string();
    }
    void operator()(const Prepare& p) {
      j["ballot"] = ballot_to_json(p.ballot);
      j["slot"] = p.from.index;
      endpoints();
    }
    void operator()(const Promise& p) {
      j["ballot"] = ballot_to_json(p.ballot);
      j["slot"] = p.from.index;
      endpoints();
      auto arr = nlohmann::ordered_json::array();
      for (const auto& sa : p.accepted) arr.push_back(slot_accepted_to_json(sa));
      j["accepted"] = std::move(arr);
    }
    void operator()(const Propose& p) {
      j["ballot"] = ballot_to_json(p.ballot);
      j["slot"] = p.slot.index;
      j["value"] = p.value.bytes;
      endpoints();
      j["commit_through"] = p.commit_through.index;
    }
    void operator()(const Accept& a) {
      j["ballot"] = ballot_to_json(a.ballot);
      j["slot"] = a.slot.index;
      endpoints();
    }
    void operator()(const Nack& n) {
      j["ballot"] = ballot_to_json(n.ballot);
      j["slot"] = n.slot ? nlohmann::ordered_json(n.slot->index) : nlohmann::ordered_json(nullptr);
      endpoints();
      j["promised"] = ballot_to_json(n.promised);
    }
    void operator()(const ClientRequest& r) {
      j["id"] = r.id;
      j["value"] = r.payload.bytes;
      endpoints();
    }
    void operator()(const ClientResponse& r) {
      j["id"] = r.id;
      j["slot"] = r.slot.index;
      j["value"] = r.payload.bytes;
      endpoints();
    }
    void operator()(const ClientReject& r) {
      j["id"] = r.id;
      endpoints();
      j["reason"] = std::string(reason_name(r.reason));
    }
  };
  std::visit(Visitor{j, m}, m.body);
  return j;
}

Message message_from_json(const nlohmann::json& j) {
  Message m;
  m.src = Endpoint::parse(j.at("src").get<std::string>());
  m.dst = Endpoint::parse(j.at("dst").get<std::string>());
  const auto type = j.at("type").get<std::string>();
  const AcceptorId sender{m.src.index};
  auto slot = [&j] { return Slot{j.at("slot").get<std::uint64_t>()}; };
  if (type == "prepare") {
    m.body = Prepare{ballot_from_json(j.at("ballot")), slot()};
  } else if (type == "promise") {
    Promise p{ballot_from_json(j.at("ballot")), slot(), {}, sender};
    for (const auto& e : j.at("accepted")) {
      p.accepted.push_back(SlotAccepted{Slot{e.at("slot").get<std::uint64_t>()},
                                        Accepted{ballot_from_json(e.at("ballot")), Value{e.at("value").get<std::string>()}}});
    }
    m.body = std::move(p);
  } else if (type == "propose") {
    m.body = Propose{ballot_from_json(j.at("ballot")), slot(), Value{j.at("value").get<std::string>()},
                     Slot{j.at("commit_through").get<std::uint64_t>()}};
  } else if (type == "accept") {
    m.body = Accept{ballot_from_json(j.at("ballot")), slot(), sender};
  } else if (type == "nack") {
    std::optional<Slot> s;
    if (!j.at("slot").is_null()) s = slot();
    m.body = Nack{ballot_from_json(j.at("ballot")), ballot_from_json(j.at("promised")), s, sender};
  } else if (type == "request") {
    m.body = ClientRequest{j.at("id").get<std::uint64_t>(), Value{j.at("value").get<std::string>()}};
  } else if (type == "response") {
    m.body = ClientResponse{j.at("id").get<std::uint64_t>(), slot(), Value{j.at("value").get<std::string>()}};
  } else if (type == "reject") {
    const auto reason = j.at("reason").get<std::string>();
    m.body = ClientReject{j.at("id").get<std::uint64_t>(),
                          reason == "not-leader" ? RejectReason::kNotLeader : RejectReason::kBackpressure};
  } else {
    throw std::invalid_argument("unknown message type '" + type + "'");
  }
  return m;
}

nlohmann::ordered_json log_to_json(const std::map<Slot, Accepted>& log) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [slot, acc] : log) arr.push_back(slot_accepted_to_json(SlotAccepted{slot, acc}));
  return arr;
}

}  // namespace fpaxos::multi
