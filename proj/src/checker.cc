#include "fpaxos/checker.h"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_set>

namespace fpaxos::checker {

namespace {

using nlohmann::ordered_json;

constexpr std::size_t kMaxAcceptors = 8;
constexpr std::uint32_t kMaxBallots = 15;
constexpr std::uint32_t kMaxValues = 15;

// Message codes: kind | acceptor | ballot | aux, one byte each.
// Promise aux packs the accepted (ballot, value + 1); Propose and Accept
// aux is the value.
enum MsgKind : std::uint8_t { kPrepare = 1, kPromise = 2, kPropose = 3, kAccept = 4 };

constexpr std::uint32_t code(std::uint8_t kind, std::uint32_t a, std::uint32_t b, std::uint32_t aux) {
  return (std::uint32_t{kind} << 24) | (a << 16) | (b << 8) | aux;
}
constexpr std::uint8_t kind_of(std::uint32_t c) { return static_cast<std::uint8_t>(c >> 24); }
constexpr std::uint32_t acc_of(std::uint32_t c) { return (c >> 16) & 0xff; }
constexpr std::uint32_t ballot_of_code(std::uint32_t c) { return (c >> 8) & 0xff; }
constexpr std::uint32_t aux_of(std::uint32_t c) { return c & 0xff; }

struct Acc {
  std::uint8_t promised = 0;
  std::uint8_t acc_ballot = 0;
  std::uint8_t acc_value = 0;  // value + 1, 0 when nothing accepted

  bool empty() const { return promised == 0 && acc_ballot == 0; }
  friend bool operator==(const Acc&, const Acc&) = default;
};

struct State {
  std::vector<Acc> acc;
  std::uint8_t amnesia_used = 0;
  std::vector<std::uint32_t> msgs;  // sorted, unique

  bool has(std::uint32_t c) const { return std::binary_search(msgs.begin(), msgs.end(), c); }
  void add(std::uint32_t c) {
    auto it = std::lower_bound(msgs.begin(), msgs.end(), c);
    if (it == msgs.end() || *it != c) msgs.insert(it, c);
  }
};

std::string encode(const State& s) {
  std::string out;
  out.reserve(s.acc.size() * 3 + 1 + s.msgs.size() * 4);
  for (const auto& a : s.acc) {
    out.push_back(static_cast<char>(a.promised));
    out.push_back(static_cast<char>(a.acc_ballot));
    out.push_back(static_cast<char>(a.acc_value));
  }
  out.push_back(static_cast<char>(s.amnesia_used));
  for (auto c : s.msgs) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((c >> shift) & 0xff));
  }
  return out;
}

State decode(std::string_view enc, std::size_t n) {
  State s;
  s.acc.resize(n);
  std::size_t i = 0;
  auto byte = [&enc, &i] { return static_cast<std::uint8_t>(enc[i++]); };
  for (auto& a : s.acc) {
    a.promised = byte();
    a.acc_ballot = byte();
    a.acc_value = byte();
  }
  s.amnesia_used = byte();
  while (i < enc.size()) {
    std::uint32_t c = 0;
    for (int k = 0; k < 4; ++k) c = (c << 8) | byte();
    s.msgs.push_back(c);
  }
  return s;
}

// Permutes acceptor labels (perm_a) and values (perm_v).
State permute(const State& s, const std::vector<std::uint32_t>& perm_a, const std::vector<std::uint32_t>& perm_v) {
  State out;
  out.acc.resize(s.acc.size());
  out.amnesia_used = s.amnesia_used;
  auto pv = [&perm_v](std::uint32_t v1) { return v1 == 0 ? 0u : perm_v[v1 - 1] + 1; };
  for (std::size_t a = 0; a < s.acc.size(); ++a) {
    Acc x = s.acc[a];
    x.acc_value = static_cast<std::uint8_t>(pv(x.acc_value));
    out.acc[perm_a[a]] = x;
  }
  out.msgs.reserve(s.msgs.size());
  for (auto c : s.msgs) {
    const auto k = kind_of(c);
    std::uint32_t a = acc_of(c);
    std::uint32_t aux = aux_of(c);
    if (k == kPromise || k == kAccept) a = perm_a[a];
    if (k == kPromise) aux = (aux & 0xf0) | pv(aux & 0x0f);
    if (k == kPropose || k == kAccept) aux = perm_v[aux];
    out.msgs.push_back(code(k, a, ballot_of_code(c), aux));
  }
  std::sort(out.msgs.begin(), out.msgs.end());
  return out;
}

std::vector<std::vector<std::uint32_t>> all_perms(std::size_t k) {
  std::vector<std::uint32_t> p(k);
  std::iota(p.begin(), p.end(), 0u);
  std::vector<std::vector<std::uint32_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

struct Violation {
  Property property;
  std::string detail;
};

class Model {
 public:
  explicit Model(const CheckConfig& cfg) : cfg_(cfg), n_(cfg.quorums.n()) {
    if (cfg_.symmetry) {
      value_perms_ = all_perms(cfg_.values);
      if (cfg_.quorums.is_symmetric()) {
        acceptor_perms_ = all_perms(n_);
      } else {
        acceptor_perms_.emplace_back(n_);
        std::iota(acceptor_perms_.front().begin(), acceptor_perms_.front().end(), 0u);
      }
    }
  }

  State initial() const {
    State s;
    s.acc.resize(n_);
    return s;
  }

  std::string canonical(const State& s) const {
    if (!cfg_.symmetry) return encode(s);
    std::string best;
    for (const auto& pa : acceptor_perms_) {
      for (const auto& pv : value_perms_) {
        auto e = encode(permute(s, pa, pv));
        if (best.empty() || e < best) best = std::move(e);
      }
    }
    return best;
  }

  // Applies an action, or returns nullopt when it is not enabled.
  std::optional<State> apply(const State& s, const Action& act) const {
    State t = s;
    const auto b = act.ballot;
    switch (act.kind) {
      case ActionKind::kPhase1a: {
        const auto c = code(kPrepare, 0, b, 0);
        if (s.has(c)) return std::nullopt;
        t.add(c);
        return t;
      }
      case ActionKind::kPhase1b: {
        auto& a = t.acc[act.acceptor];
        if (!s.has(code(kPrepare, 0, b, 0)) || b <= a.promised) return std::nullopt;
        t.add(code(kPromise, act.acceptor, b, (std::uint32_t{a.acc_ballot} << 4) | a.acc_value));
        a.promised = static_cast<std::uint8_t>(b);
        return t;
      }
      case ActionKind::kPhase2a: {
        if (has_propose(s, b)) return std::nullopt;
        if (!act.quorum.is_subset_of(promisers(s, b)) || !minimal_q1(act.quorum)) return std::nullopt;
        const auto forced = forced_value(s, b, act.quorum);
        if (forced && *forced != act.value) return std::nullopt;
        t.add(code(kPropose, 0, b, act.value));
        return t;
      }
      case ActionKind::kPhase2b: {
        auto& a = t.acc[act.acceptor];
        if (!s.has(code(kPropose, 0, b, act.value)) || b < a.promised) return std::nullopt;
        const Acc next{static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(b),
                       static_cast<std::uint8_t>(act.value + 1)};
        if (a == next) return std::nullopt;
        a = next;
        t.add(code(kAccept, act.acceptor, b, act.value));
        return t;
      }
      case ActionKind::kAmnesia: {
        auto& a = t.acc[act.acceptor];
        if (s.amnesia_used >= cfg_.amnesia || a.empty()) return std::nullopt;
        a = Acc{};
        ++t.amnesia_used;
        return t;
      }
    }
    return std::nullopt;
  }

  std::vector<Action> enabled(const State& s) const {
    std::vector<Action> out;
    for (std::uint32_t b = 1; b <= cfg_.ballots; ++b) {
      if (!s.has(code(kPrepare, 0, b, 0))) out.push_back(Action{ActionKind::kPhase1a, 0, b, 0, {}});
    }
    for (std::uint32_t b = 1; b <= cfg_.ballots; ++b) {
      if (!s.has(code(kPrepare, 0, b, 0))) continue;
      for (std::uint32_t a = 0; a < n_; ++a) {
        if (b > s.acc[a].promised) out.push_back(Action{ActionKind::kPhase1b, a, b, 0, {}});
      }
    }
    for (std::uint32_t b = 1; b <= cfg_.ballots; ++b) {
      if (has_propose(s, b)) continue;
      const auto from = promisers(s, b);
      if (!cfg_.quorums.is_q1(from)) continue;
      std::vector<bool> seen(cfg_.values, false);
      // Submasks of the promisers, ascending, so the first quorum for each
      // value is the lowest bitmask.
      std::vector<std::uint64_t> subs;
      for (std::uint64_t m = from.bits();; m = (m - 1) & from.bits()) {
        subs.push_back(m);
        if (m == 0) break;
      }
      std::sort(subs.begin(), subs.end());
      for (auto m : subs) {
        const auto q = AcceptorSet::from_bits(m);
        if (!minimal_q1(q)) continue;
        if (const auto forced = forced_value(s, b, q)) {
          if (!seen[*forced]) {
            seen[*forced] = true;
            out.push_back(Action{ActionKind::kPhase2a, 0, b, *forced, q});
          }
        } else {
          for (std::uint32_t v = 0; v < cfg_.values; ++v) {
            if (!seen[v]) {
              seen[v] = true;
              out.push_back(Action{ActionKind::kPhase2a, 0, b, v, q});
            }
          }
        }
      }
    }
    for (auto c : s.msgs) {
      if (kind_of(c) != kPropose) continue;
      const auto b = ballot_of_code(c);
      const auto v = aux_of(c);
      for (std::uint32_t a = 0; a < n_; ++a) {
        const auto& x = s.acc[a];
        if (b >= x.promised && !(x.acc_ballot == b && x.acc_value == v + 1)) {
          out.push_back(Action{ActionKind::kPhase2b, a, b, v, {}});
        }
      }
    }
    if (s.amnesia_used < cfg_.amnesia) {
      for (std::uint32_t a = 0; a < n_; ++a) {
        if (!s.acc[a].empty()) out.push_back(Action{ActionKind::kAmnesia, a, 0, 0, {}});
      }
    }
    return out;
  }

  std::vector<Violation> violations(const State& s) const {
    std::vector<Violation> out;
    // (ballot, value) pairs accepted by a full Q2, by Accept history.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> decided;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> proposed;
    std::map<std::pair<std::uint32_t, std::uint32_t>, AcceptorSet> accepts;
    for (auto c : s.msgs) {
      if (kind_of(c) == kAccept) accepts[{ballot_of_code(c), aux_of(c)}].insert(AcceptorId{acc_of(c)});
      if (kind_of(c) == kPropose) proposed.emplace_back(ballot_of_code(c), aux_of(c));
    }
    for (const auto& [bv, set] : accepts) {
      if (cfg_.quorums.is_q2(set)) decided.push_back(bv);
    }
    for (std::size_t i = 0; i < decided.size(); ++i) {
      for (std::size_t j = i + 1; j < decided.size(); ++j) {
        if (decided[i].second != decided[j].second) {
          out.push_back({Property::kAgreement, describe("decided", decided[i]) + " and " + describe("decided", decided[j])});
          i = decided.size();
          break;
        }
      }
    }
    bool t2 = false;
    for (const auto& d : decided) {
      for (const auto& p : proposed) {
        if (p.first > d.first && p.second != d.second) {
          out.push_back({Property::kProposal, describe("decided", d) + " but " + describe("proposed", p)});
          t2 = true;
          break;
        }
      }
      if (t2) break;
    }
    return out;
  }

  std::size_t n() const { return n_; }

 private:
  std::string describe(const char* what, std::pair<std::uint32_t, std::uint32_t> bv) const {
    return std::string(what) + " (" + std::to_string(bv.first) + "," + value_name(bv.second).bytes + ")";
  }

  static bool has_propose(const State& s, std::uint32_t b) {
    const auto lo = std::lower_bound(s.msgs.begin(), s.msgs.end(), code(kPropose, 0, b, 0));
    return lo != s.msgs.end() && kind_of(*lo) == kPropose && ballot_of_code(*lo) == b;
  }

  AcceptorSet promisers(const State& s, std::uint32_t b) const {
    AcceptorSet out;
    for (auto c : s.msgs) {
      if (kind_of(c) == kPromise && ballot_of_code(c) == b) out.insert(AcceptorId{acc_of(c)});
    }
    return out;
  }

  bool minimal_q1(AcceptorSet q) const {
    if (!cfg_.quorums.is_q1(q)) return false;
    for (auto a : q.members()) {
      auto smaller = q;
      smaller.erase(a);
      if (cfg_.quorums.is_q1(smaller)) return false;
    }
    return true;
  }

  std::optional<std::uint32_t> forced_value(const State& s, std::uint32_t b, AcceptorSet q) const {
    std::uint32_t best_ballot = 0;
    std::optional<std::uint32_t> best;
    for (auto c : s.msgs) {
      if (kind_of(c) != kPromise || ballot_of_code(c) != b || !q.contains(AcceptorId{acc_of(c)})) continue;
      const auto ab = aux_of(c) >> 4;
      const auto av = aux_of(c) & 0x0f;
      if (ab > best_ballot) {
        best_ballot = ab;
        best = av - 1;
      }
    }
    return best;
  }

  const CheckConfig& cfg_;
  std::size_t n_;
  std::vector<std::vector<std::uint32_t>> value_perms_;
  std::vector<std::vector<std::uint32_t>> acceptor_perms_;
};

struct Node {
  std::string enc;
  std::string canon;  // empty unless symmetry is on
  std::uint32_t parent = 0;
  std::uint32_t depth = 0;
  Action action;
};

std::vector<Action> path_to(const std::deque<Node>& nodes, std::uint32_t i) {
  std::vector<Action> path;
  while (i != 0) {
    path.push_back(nodes[i].action);
    i = nodes[i].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

AcceptorState to_core(const CheckConfig& cfg, const Acc& a) {
  AcceptorState st;
  if (a.promised) st.promised = ballot_of(cfg, a.promised);
  if (a.acc_ballot) st.accepted = Accepted{ballot_of(cfg, a.acc_ballot), value_name(a.acc_value - 1u)};
  return st;
}

}  // namespace

void CheckConfig::validate() const {
  if (quorums.n() == 0 || quorums.n() > kMaxAcceptors) {
    throw std::invalid_argument("checker supports 1.." + std::to_string(kMaxAcceptors) + " acceptors");
  }
  if (ballots < 1 || ballots > kMaxBallots) throw std::invalid_argument("ballots must be in 1..15");
  if (values < 1 || values > kMaxValues) throw std::invalid_argument("values must be in 1..15");
  if (proposers < 1) throw std::invalid_argument("proposers must be at least 1");
  if (amnesia > 255) throw std::invalid_argument("amnesia must be at most 255");
  if (max_states == 0) throw std::invalid_argument("max_states must be positive");
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kPhase1a: return "phase1a";
    case ActionKind::kPhase1b: return "phase1b";
    case ActionKind::kPhase2a: return "phase2a";
    case ActionKind::kPhase2b: return "phase2b";
    case ActionKind::kAmnesia: return "amnesia";
  }
  return "unknown";
}

std::string_view to_string(Property p) {
  return p == Property::kAgreement ? "agreement" : "proposal";
}

const Counterexample* CheckResult::find(Property p) const {
  for (const auto& v : violations) {
    if (v.property == p) return &v;
  }
  return nullptr;
}

Value value_name(std::uint32_t v) {
  if (v < 26) return Value{std::string(1, static_cast<char>('a' + v))};
  return Value{"v" + std::to_string(v)};
}

Ballot ballot_of(const CheckConfig& cfg, std::uint32_t round) {
  return Ballot{round, ProposerId{(round - 1) % cfg.proposers}};
}

CheckResult explore(const CheckConfig& cfg) {
  cfg.validate();
  const Model model(cfg);
  CheckResult result;

  std::deque<Node> nodes;
  std::unordered_set<std::string_view> visited;
  auto key = [&cfg](const Node& n) -> std::string_view { return cfg.symmetry ? n.canon : n.enc; };

  auto admit = [&](const State& s, std::uint32_t parent, std::uint32_t depth, const Action& act) -> bool {
    Node node{encode(s), cfg.symmetry ? model.canonical(s) : std::string(), parent, depth, act};
    if (visited.count(key(node))) return false;
    nodes.push_back(std::move(node));
    visited.insert(key(nodes.back()));
    result.depth = std::max(result.depth, depth);
    return true;
  };

  admit(model.initial(), 0, 0, Action{});
  bool stop = false;
  for (std::uint32_t i = 0; i < nodes.size() && !stop; ++i) {
    const State s = decode(nodes[i].enc, model.n());
    const auto depth = nodes[i].depth;
    for (const auto& act : model.enabled(s)) {
      auto next = model.apply(s, act);
      if (!next) continue;
      ++result.transitions;
      if (!admit(*next, i, depth + 1, act)) continue;
      for (auto& v : model.violations(*next)) {
        if (result.find(v.property)) continue;
        result.violations.push_back(
            Counterexample{v.property, path_to(nodes, static_cast<std::uint32_t>(nodes.size() - 1)), v.detail});
        if (v.property == Property::kAgreement) stop = true;
      }
      if (stop) break;
      if (nodes.size() >= cfg.max_states) {
        result.complete = false;
        stop = true;
        break;
      }
    }
  }
  result.states = nodes.size();
  std::sort(result.violations.begin(), result.violations.end(),
            [](const Counterexample& a, const Counterexample& b) { return a.property < b.property; });
  return result;
}

bool ReplayState::conflicting() const {
  for (const auto& d : decisions) {
    if (d.value != decisions.front().value) return true;
  }
  return false;
}

ReplayState replay(const CheckConfig& cfg, const std::vector<Action>& path) {
  cfg.validate();
  const Model model(cfg);
  const auto& qs = cfg.quorums;
  ReplayState rs;
  for (std::uint32_t a = 0; a < qs.n(); ++a) rs.acceptors[AcceptorId{a}] = AcceptorState{};
  State mirror = model.initial();
  // What a learner sees from the Accept stream, per ballot.
  std::map<Ballot, std::map<AcceptorId, AcceptorState>> heard;

  auto fail = [](std::size_t step, const Action& act, const std::string& why) {
    throw ReplayDivergence("step " + std::to_string(step) + " (" + std::string(to_string(act.kind)) + "): " + why);
  };
  auto note = [&rs](const Decision& d) {
    for (const auto& q : d.quorums) {
      if (std::find(rs.decisions.begin(), rs.decisions.end(), q) == rs.decisions.end()) rs.decisions.push_back(q);
    }
  };
  auto sent_body = [&rs](auto pred) {
    return std::any_of(rs.sent.begin(), rs.sent.end(), [&pred](const Message& m) { return pred(m.body); });
  };

  for (std::size_t step = 0; step < path.size(); ++step) {
    const auto& act = path[step];
    auto next = model.apply(mirror, act);
    if (!next) fail(step, act, "not enabled in the checker model");
    const Ballot ballot = act.kind == ActionKind::kAmnesia ? Ballot{} : ballot_of(cfg, act.ballot);
    const Endpoint proposer = Endpoint::proposer(ballot.proposer.index);
    const AcceptorId self{act.acceptor};

    switch (act.kind) {
      case ActionKind::kPhase1a:
        for (std::uint32_t a = 0; a < qs.n(); ++a) rs.sent.push_back(Message{proposer, Endpoint::acceptor(a), Prepare{ballot}});
        break;
      case ActionKind::kPhase1b: {
        if (!sent_body([&](const MessageBody& b) {
              const auto* p = std::get_if<Prepare>(&b);
              return p && p->ballot == ballot;
            })) {
          fail(step, act, "no prepare sent");
        }
        auto st = acceptor_handle_prepare(rs.acceptors.at(self), Prepare{ballot}, self);
        if (!st.granted()) fail(step, act, "core acceptor refused the prepare");
        rs.acceptors[self] = st.state;
        rs.sent.push_back(Message{Endpoint::acceptor(self.index), proposer, st.reply});
        break;
      }
      case ActionKind::kPhase2a: {
        auto ps = ProposerState::make(ballot.proposer, ballot.round, value_name(act.value));
        auto start = proposer_start(ps, qs, act.quorum);
        ps = std::move(start.state);
        std::vector<Message> out;
        for (auto a : act.quorum.members()) {
          const Promise* found = nullptr;
          for (const auto& m : rs.sent) {
            const auto* p = std::get_if<Promise>(&m.body);
            if (p && p->ballot == ballot && p->from == a) found = p;
          }
          if (!found) fail(step, act, "missing promise from " + Endpoint::acceptor(a.index).to_string());
          auto st = proposer_on_promise(ps, qs, *found);
          ps = std::move(st.state);
          out.insert(out.end(), st.out.begin(), st.out.end());
        }
        if (ps.phase != ProposerPhase::kPhase2 || !ps.chosen_value) fail(step, act, "core proposer did not reach phase 2");
        if (*ps.chosen_value != value_name(act.value)) {
          fail(step, act, "core proposer chose " + ps.chosen_value->bytes + ", checker chose " + value_name(act.value).bytes);
        }
        rs.sent.insert(rs.sent.end(), out.begin(), out.end());
        break;
      }
      case ActionKind::kPhase2b: {
        const Propose prop{ballot, value_name(act.value)};
        if (!sent_body([&](const MessageBody& b) {
              const auto* p = std::get_if<Propose>(&b);
              return p && *p == prop;
            })) {
          fail(step, act, "no such proposal sent");
        }
        auto st = acceptor_handle_propose(rs.acceptors.at(self), prop, self);
        if (!st.granted()) fail(step, act, "core acceptor refused the proposal");
        rs.acceptors[self] = st.state;
        rs.sent.push_back(Message{Endpoint::acceptor(self.index), proposer, st.reply});
        auto& view = heard[ballot];
        view[self] = AcceptorState{ballot, Accepted{ballot, prop.value}};
        for (std::uint32_t a = 0; a < qs.n(); ++a) view.try_emplace(AcceptorId{a});
        note(learner_decided(view, qs));
        break;
      }
      case ActionKind::kAmnesia:
        rs.acceptors[self] = AcceptorState{};
        break;
    }
    mirror = std::move(*next);
    for (std::uint32_t a = 0; a < qs.n(); ++a) {
      if (!(to_core(cfg, mirror.acc[a]) == rs.acceptors.at(AcceptorId{a}))) {
        fail(step, act, "acceptor " + Endpoint::acceptor(a).to_string() + " state differs from the checker");
      }
    }
    note(learner_decided(rs.acceptors, qs));
  }
  return rs;
}

ordered_json to_json(const CheckConfig& cfg, const Action& a) {
  ordered_json j;
  j["action"] = to_string(a.kind);
  if (a.kind != ActionKind::kAmnesia) {
    const auto b = ballot_of(cfg, a.ballot);
    j["ballot"] = ballot_to_json(b);
    j["proposer"] = Endpoint::proposer(b.proposer.index).to_string();
  }
  if (a.kind == ActionKind::kPhase1b || a.kind == ActionKind::kPhase2b || a.kind == ActionKind::kAmnesia) {
    j["acceptor"] = Endpoint::acceptor(a.acceptor).to_string();
  }
  if (a.kind == ActionKind::kPhase2a || a.kind == ActionKind::kPhase2b) j["value"] = value_name(a.value).bytes;
  if (a.kind == ActionKind::kPhase2a) {
    ordered_json q = ordered_json::array();
    for (auto m : a.quorum.members()) q.push_back(m.index);
    j["quorum"] = std::move(q);
  }
  return j;
}

std::string counterexample_jsonl(const CheckConfig& cfg, const Counterexample& cx) {
  std::ostringstream out;
  for (std::size_t i = 0; i < cx.path.size(); ++i) {
    ordered_json j;
    j["step"] = i;
    const auto body = to_json(cfg, cx.path[i]);
    for (const auto& [k, v] : body.items()) j[k] = v;
    out << j.dump() << '\n';
  }
  ordered_json v;
  v["step"] = cx.path.size();
  v["event"] = "violation";
  v["property"] = to_string(cx.property);
  v["detail"] = cx.detail;
  out << v.dump() << '\n';
  return out.str();
}

ordered_json to_json(const CheckResult& r) {
  ordered_json j;
  j["states"] = r.states;
  j["transitions"] = r.transitions;
  j["depth"] = r.depth;
  j["complete"] = r.complete;
  ordered_json vs = ordered_json::array();
  for (const auto& v : r.violations) {
    vs.push_back({{"property", to_string(v.property)}, {"length", v.path.size()}, {"detail", v.detail}});
  }
  j["violations"] = std::move(vs);
  return j;
}

CheckConfig check_config_from_json(const nlohmann::json& j) {
  CheckConfig cfg;
  if (j.contains("quorums")) cfg.quorums = quorum_system_from_json(j.at("quorums"));
  cfg.ballots = j.value("ballots", cfg.ballots);
  cfg.values = j.value("values", cfg.values);
  cfg.proposers = j.value("proposers", cfg.proposers);
  cfg.amnesia = j.value("amnesia", cfg.amnesia);
  cfg.symmetry = j.value("symmetry", cfg.symmetry);
  cfg.max_states = j.value("max_states", cfg.max_states);
  cfg.validate();
  return cfg;
}

ordered_json to_json(const CheckConfig& cfg) {
  nlohmann::json q;
  fpaxos::to_json(q, cfg.quorums);
  ordered_json j;
  j["quorums"] = q;
  j["ballots"] = cfg.ballots;
  j["values"] = cfg.values;
  j["proposers"] = cfg.proposers;
  j["amnesia"] = cfg.amnesia;
  j["symmetry"] = cfg.symmetry;
  j["max_states"] = cfg.max_states;
  return j;
}

namespace {

std::vector<AcceptorSet> all_of_size(std::size_t n, std::size_t k) {
  std::vector<AcceptorSet> out;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    if (static_cast<std::size_t>(std::popcount(m)) == k) out.push_back(AcceptorSet::from_bits(m));
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, QuorumSystem>> sweep_catalog(std::size_t n_max) {
  std::vector<std::pair<std::string, QuorumSystem>> out;
  for (std::size_t n = 2; n <= n_max; ++n) {
    const auto tag = "n=" + std::to_string(n);
    out.emplace_back("majority " + tag, make_majority(n, false));
    if (n % 2 == 0) out.emplace_back("improved-majority " + tag, make_majority(n, true));
    for (std::size_t q2 = 1; q2 <= n; ++q2) {
      out.emplace_back("simple " + tag + " q2=" + std::to_string(q2), make_simple(n, q2));
    }
    if (n == 4) {
      out.emplace_back("grid-fpaxos 2x2", make_grid(2, 2, GridMode::kFPaxos));
      out.emplace_back("grid-paxos 2x2", make_grid(2, 2, GridMode::kPaxos));
    }
    for (std::size_t k1 = 1; k1 < n; ++k1) {
      for (std::size_t k2 = 1; k1 + k2 <= n; ++k2) {
        out.emplace_back("any-" + std::to_string(k1) + "/any-" + std::to_string(k2) + " " + tag,
                         make_custom(n, all_of_size(n, k1), all_of_size(n, k2)));
      }
    }
    out.emplace_back("disjoint " + tag, make_custom(n, {AcceptorSet::from_bits(1)}, {AcceptorSet::from_bits(2)}));
  }
  return out;
}

std::vector<SweepEntry> quorum_safety_sweep(std::size_t n_max, std::uint32_t ballots, std::uint32_t values) {
  std::vector<SweepEntry> out;
  for (auto& [name, qs] : sweep_catalog(n_max)) {
    CheckConfig cfg;
    cfg.quorums = qs;
    cfg.ballots = ballots;
    cfg.values = values;
    SweepEntry e{name, qs, validate_cross_intersection(qs).holds(), explore(cfg)};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace fpaxos::checker
