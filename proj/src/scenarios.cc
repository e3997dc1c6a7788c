#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

#include "fpaxos/core.h"
#include "fpaxos/sim.h"

namespace fpaxos::sim {

namespace {

using nlohmann::ordered_json;

std::vector<AcceptorId> with_rest(const QuorumSystem& qs, std::initializer_list<std::uint32_t> head) {
  std::vector<AcceptorId> order;
  for (auto i : head) order.push_back(AcceptorId{i});
  for (std::uint32_t i = 0; i < qs.n(); ++i) {
    if (std::find(order.begin(), order.end(), AcceptorId{i}) == order.end()) order.push_back(AcceptorId{i});
  }
  return order;
}

// Two proposers and four acceptors exchanging core messages over a FIFO
// network that only moves when the script says so.
class Script {
 public:
  explicit Script(QuorumSystem qs) : qs_(std::move(qs)) {
    for (std::uint32_t i = 0; i < qs_.n(); ++i) acceptors_[AcceptorId{i}] = AcceptorState{};
  }

  // Phase 1 to the listed acceptors, in that order. Falls back to a
  // quorum built from that preference when the set is not a Q1 here.
  void start(std::uint32_t p, std::uint64_t round, Value v, std::initializer_list<std::uint32_t> prepare_to,
             std::initializer_list<std::uint32_t> propose_pref) {
    auto ps = ProposerState::make(ProposerId{p}, round, std::move(v));
    ps.q2_order = with_rest(qs_, propose_pref);
    const auto pref = with_rest(qs_, prepare_to);
    AcceptorSet targets;
    for (auto i : prepare_to) targets.insert(AcceptorId{i});
    if (!qs_.is_q1(targets)) targets = select_quorum(qs_, Phase::kOne, pref).value_or(qs_.universe());
    auto step = proposer_start(ps, qs_, targets);
    proposers_[p] = std::move(step.state);
    enqueue(order_by(std::move(step.out), pref));
  }

  // Delivers every queued message from src, in queue order.
  void deliver_from(Endpoint src) {
    std::vector<Message> batch;
    for (auto it = net_.begin(); it != net_.end();) {
      if (it->src == src) {
        batch.push_back(std::move(*it));
        it = net_.erase(it);
      } else {
        ++it;
      }
    }
    for (auto& m : batch) deliver(m);
  }

  void deliver_from_acceptors(std::initializer_list<std::uint32_t> order) {
    for (auto a : with_rest(qs_, order)) deliver_from(Endpoint::acceptor(a.index));
  }

  void deliver_all() {
    while (!net_.empty()) {
      auto m = std::move(net_.front());
      net_.pop_front();
      deliver(m);
    }
  }

  ScenarioResult finish(std::string name) {
    ScenarioResult r;
    r.name = std::move(name);
    r.decisions = decisions_;
    for (const auto& [a, st] : acceptors_) r.final_acceptors[a.index] = st;
    ordered_json final;
    final["type"] = "final";
    ordered_json accs = ordered_json::object();
    for (const auto& [a, st] : acceptors_) accs[Endpoint::acceptor(a.index).to_string()] = to_json(st);
    final["acceptors"] = std::move(accs);
    const auto d = learner_decided(acceptors_, qs_);
    final["decided"] = d.decided() ? ordered_json(d.decided()->value.bytes) : ordered_json(nullptr);
    final["conflict"] = d.conflict();
    trace_.push_back(final.dump());
    r.trace = std::move(trace_);
    return r;
  }

  const QuorumSystem& quorums() const { return qs_; }
  const std::map<AcceptorId, AcceptorState>& acceptors() const { return acceptors_; }
  std::size_t promises_carrying(std::uint32_t p, const Accepted& acc) const { return carried_.count({p, acc}); }

 private:
  static std::vector<Message> order_by(std::vector<Message> out, const std::vector<AcceptorId>& pref) {
    auto rank = [&pref](const Message& m) {
      return std::find(pref.begin(), pref.end(), AcceptorId{m.dst.index}) - pref.begin();
    };
    std::stable_sort(out.begin(), out.end(), [&](const Message& a, const Message& b) { return rank(a) < rank(b); });
    return out;
  }

  void enqueue(std::vector<Message> msgs) {
    for (auto& m : msgs) net_.push_back(std::move(m));
  }

  void record(const Message& m) {
    ordered_json j;
    j["step"] = trace_.size();
    const auto body = to_json(m);
    for (const auto& [k, v] : body.items()) j[k] = v;
    trace_.push_back(j.dump());
  }

  void deliver(const Message& m) {
    record(m);
    if (m.dst.kind == Endpoint::Kind::kAcceptor) {
      const AcceptorId a{m.dst.index};
      const Endpoint self = m.dst;
      AcceptorStep step;
      if (const auto* p = std::get_if<Prepare>(&m.body)) {
        step = acceptor_handle_prepare(acceptors_.at(a), *p, a);
      } else if (const auto* p = std::get_if<Propose>(&m.body)) {
        step = acceptor_handle_propose(acceptors_.at(a), *p, a);
      } else {
        throw std::logic_error("acceptor got " + std::string(message_type(m.body)));
      }
      acceptors_[a] = step.state;
      net_.push_back(Message{self, m.src, step.reply});
      return;
    }
    const auto p = m.dst.index;
    auto& ps = proposers_.at(p);
    const auto before = ps.phase;
    if (const auto* pr = std::get_if<Promise>(&m.body)) {
      if (pr->accepted) carried_.insert({p, *pr->accepted});
      auto step = proposer_on_promise(ps, qs_, *pr);
      ps = std::move(step.state);
      enqueue(order_by(std::move(step.out), ps.q2_order));
    } else if (const auto* ac = std::get_if<Accept>(&m.body)) {
      ps = proposer_on_accept(ps, qs_, *ac);
    } else if (const auto* nk = std::get_if<Nack>(&m.body)) {
      ps = proposer_on_nack(ps, *nk);
    }
    if (before != ProposerPhase::kDecided && ps.phase == ProposerPhase::kDecided) {
      decisions_.emplace_back(p, *ps.chosen_value);
      ordered_json j;
      j["step"] = trace_.size();
      j["type"] = "decided";
      j["ballot"] = ballot_to_json(ps.ballot);
      j["value"] = ps.chosen_value->bytes;
      j["proposer"] = Endpoint::proposer(p).to_string();
      trace_.push_back(j.dump());
    }
  }

  QuorumSystem qs_;
  std::map<AcceptorId, AcceptorState> acceptors_;
  std::map<std::uint32_t, ProposerState> proposers_;
  std::deque<Message> net_;
  std::vector<std::string> trace_;
  std::vector<std::pair<std::uint32_t, Value>> decisions_;
  std::set<std::pair<std::uint32_t, Accepted>> carried_;
};

ScenarioResult fig2a(const QuorumSystem& qs) {
  Script s(qs);
  const Value a{"a"};
  s.start(0, 1, a, {0, 1, 2}, {0, 1});
  s.deliver_from(Endpoint::proposer(0));
  s.deliver_from_acceptors({0, 1, 2});
  s.deliver_from(Endpoint::proposer(0));
  s.deliver_from_acceptors({0, 1});

  s.start(1, 2, Value{"b"}, {3, 2, 1}, {3, 2});
  s.deliver_from(Endpoint::proposer(1));
  s.deliver_from_acceptors({3, 2, 1});
  s.deliver_from(Endpoint::proposer(1));
  s.deliver_from_acceptors({3, 2});

  const bool carried = s.promises_carrying(1, Accepted{Ballot{1, ProposerId{0}}, a}) > 0;
  auto r = s.finish("fig2a");
  const auto d = learner_decided(s.acceptors(), qs);
  const std::vector<std::pair<std::uint32_t, Value>> expected{{0, a}, {1, a}};
  r.outcome_ok = carried && r.decisions == expected && d.decided() && d.decided()->value == a && !d.conflict();
  r.outcome = r.outcome_ok ? "P0 and P1 both decide a" : "unexpected outcome";
  return r;
}

ScenarioResult fig2b(const QuorumSystem& qs) {
  Script s(qs);
  s.start(0, 1, Value{"a"}, {0, 1, 2}, {0, 1});
  s.deliver_from(Endpoint::proposer(0));
  s.deliver_from_acceptors({0, 1, 2});
  s.start(1, 2, Value{"b"}, {3, 2, 1}, {3, 2});
  s.deliver_from(Endpoint::proposer(1));
  s.deliver_from_acceptors({3, 2, 1});
  // Both proposals are now in flight to disjoint Q2s.
  s.deliver_from(Endpoint::proposer(0));
  s.deliver_from(Endpoint::proposer(1));
  s.deliver_all();

  auto r = s.finish("fig2b");
  const auto d = learner_decided(s.acceptors(), qs);
  r.outcome_ok = r.decisions.size() == 1 && d.decided() && !d.conflict() && d.decided()->value == r.decisions[0].second;
  r.outcome = r.outcome_ok ? "only P" + std::to_string(r.decisions[0].first) + " decides " + r.decisions[0].second.bytes
                           : "unexpected outcome";
  return r;
}

}  // namespace

ScenarioResult scripted_scenario(std::string_view name, std::optional<QuorumSystem> qs) {
  const QuorumSystem system = qs.value_or(make_majority(4, true));
  if (system.n() != 4) throw std::invalid_argument("scripted scenarios need four acceptors");
  if (name == "fig2a") return fig2a(system);
  if (name == "fig2b") return fig2b(system);
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

}  // namespace fpaxos::sim
