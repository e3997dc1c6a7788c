#include "fpaxos/sim.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace fpaxos::sim {

using multi::Slot;
using nlohmann::ordered_json;

std::string_view to_string(LatencyModel::Kind k) {
  switch (k) {
    case LatencyModel::Kind::kFixed: return "fixed";
    case LatencyModel::Kind::kUniform: return "uniform";
    case LatencyModel::Kind::kHeterogeneous: return "heterogeneous";
  }
  return "unknown";
}

LatencyModel::Kind latency_kind_from_string(std::string_view name) {
  for (auto k : {LatencyModel::Kind::kFixed, LatencyModel::Kind::kUniform, LatencyModel::Kind::kHeterogeneous}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown latency model '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument(why); };
  const auto n = quorums.n();
  auto check_replica = [&](std::uint32_t r, const char* what) {
    if (r >= n) fail(std::string(what) + " names replica " + std::to_string(r) + " but n=" + std::to_string(n));
  };
  if (loss < 0 || loss > 1) fail("loss probability must be in [0,1]");
  if (duplicate < 0 || duplicate > 1) fail("duplicate probability must be in [0,1]");
  if (latency.fixed_us < 0 || latency.min_us < 0 || latency.max_us < latency.min_us) fail("bad latency range");
  if (client_latency_us && *client_latency_us < 0) fail("client latency must be non-negative");
  if (duration_us <= 0) fail("duration must be positive");
  if (warmup_us < 0 || cooldown_us < 0 || warmup_us + cooldown_us >= duration_us) {
    fail("warmup + cooldown must be shorter than the run");
  }
  if (tick_us <= 0) fail("tick interval must be positive");
  if (client_window == 0 || replica_window == 0) fail("windows must be positive");
  if (retry_timeout_us <= 0 || client_timeout_us <= 0) fail("timeouts must be positive");
  check_replica(initial_leader, "initial leader");
  auto ordered = [](const auto& events) {
    return std::is_sorted(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  };
  if (!ordered(crashes) || !ordered(restores) || !ordered(elections) || !ordered(partitions)) {
    fail("schedules must be time-ordered");
  }
  for (const auto& c : crashes) check_replica(c.replica, "crash");
  for (const auto& r : restores) check_replica(r.replica, "restore");
  for (const auto& e : elections) check_replica(e.replica, "election");
  const auto universe = AcceptorSet::universe(n);
  for (const auto& p : partitions) {
    AcceptorSet seen;
    for (const auto& g : p.groups) {
      if (!g.is_subset_of(universe)) fail("partition group outside the replica set");
      if (g.intersects(seen)) fail("partition groups overlap");
      seen = seen | g;
    }
  }
}

std::size_t RunMetrics::decisions_between(TimeUs from, TimeUs to) const {
  return static_cast<std::size_t>(std::count_if(decisions.begin(), decisions.end(),
                                                [&](const auto& d) { return d.first >= from && d.first < to; }));
}

std::size_t RunMetrics::completions_between(TimeUs from, TimeUs to) const {
  return static_cast<std::size_t>(
      std::count_if(completions.begin(), completions.end(), [&](TimeUs t) { return t >= from && t < to; }));
}

std::vector<std::vector<TimeUs>> link_latencies(const SimConfig& cfg) {
  const auto n = cfg.n();
  std::vector<std::vector<TimeUs>> m(n, std::vector<TimeUs>(n, 0));
  const auto& lat = cfg.latency;
  std::mt19937_64 rng(cfg.seed ^ 0x5851F42D4C957F2DULL);
  std::uniform_int_distribution<TimeUs> dist(lat.min_us, lat.max_us);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      TimeUs d = 0;
      switch (lat.kind) {
        case LatencyModel::Kind::kFixed: d = lat.fixed_us; break;
        case LatencyModel::Kind::kUniform: d = (lat.min_us + lat.max_us) / 2; break;
        case LatencyModel::Kind::kHeterogeneous: d = dist(rng); break;
      }
      m[i][j] = m[j][i] = d;
    }
  }
  return m;
}

namespace {

double ms(TimeUs us) { return static_cast<double>(us) / kMs; }

// Messages in flight live in World's pool; events carry the index.
struct Deliver {
  std::size_t pooled;
};
struct Tick {
  std::uint32_t replica;
};
struct ClientTick {};
using ScheduleItem = std::variant<CrashEvent, RestoreEvent, ElectEvent, PartitionEvent>;
struct Scheduled {
  std::size_t index;
};
using EventBody = std::variant<Deliver, Tick, ClientTick, Scheduled>;

struct Event {
  TimeUs at;
  std::uint64_t seq;
  EventBody body;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.at != b.at ? a.at > b.at : a.seq > b.seq;
  }
};

struct Outstanding {
  TimeUs first_sent = 0;
  TimeUs last_sent = 0;
};

class World {
 public:
  World(const SimConfig& cfg, std::ostream* trace)
      : cfg_(cfg), trace_(trace), rng_(cfg.seed), links_(link_latencies(cfg)) {
    const auto n = cfg_.n();
    if (cfg_.client_latency_us) {
      client_latency_ = *cfg_.client_latency_us;
    } else {
      client_latency_ = cfg_.latency.kind == LatencyModel::Kind::kFixed ? cfg_.latency.fixed_us
                                                                        : (cfg_.latency.min_us + cfg_.latency.max_us) / 2;
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      multi::ReplicaOptions opts;
      opts.window = cfg_.replica_window;
      opts.strategy = cfg_.strategy;
      opts.send_to_all = cfg_.send_to_all;
      opts.seed = cfg_.seed * 1000003ULL + i;
      opts.retry_timeout_us = cfg_.retry_timeout_us;
      opts.nearest = nearest_order(i);
      replicas_.emplace_back(AcceptorId{i}, cfg_.quorums, std::move(opts));
    }
    crashed_.assign(n, false);
    lose_memory_.assign(n, false);
    group_.assign(n, 0);
    metrics_.sent_per_replica.assign(n, 0);
    metrics_.received_per_replica.assign(n, 0);
    leader_ = cfg_.initial_leader;
  }

  RunMetrics run() {
    schedule_.push_back(ElectEvent{0, cfg_.initial_leader});
    for (const auto& c : cfg_.crashes) schedule_.push_back(c);
    for (const auto& r : cfg_.restores) schedule_.push_back(r);
    for (const auto& e : cfg_.elections) schedule_.push_back(e);
    for (const auto& p : cfg_.partitions) schedule_.push_back(p);
    for (std::size_t i = 0; i < schedule_.size(); ++i) {
      const TimeUs at = std::visit([](const auto& e) { return e.at; }, schedule_[i]);
      push(at, Scheduled{i});
    }
    for (std::uint32_t r = 0; r < cfg_.n(); ++r) push(cfg_.tick_us, Tick{r});
    push(0, ClientTick{});

    while (!queue_.empty() && !metrics_.violation) {
      Event ev = queue_.top();
      queue_.pop();
      if (ev.at > cfg_.duration_us) break;
      ++metrics_.events;
      now_ = ev.at;
      std::visit([this](auto& body) { handle(body); }, ev.body);
    }
    finish();
    return std::move(metrics_);
  }

 private:
  std::vector<AcceptorId> nearest_order(std::uint32_t self) const {
    std::vector<AcceptorId> order(cfg_.n());
    for (std::uint32_t i = 0; i < cfg_.n(); ++i) order[i] = AcceptorId{i};
    std::stable_sort(order.begin(), order.end(),
                     [&](AcceptorId a, AcceptorId b) { return links_[self][a.index] < links_[self][b.index]; });
    return order;
  }

  void push(TimeUs at, EventBody body) { queue_.push(Event{at, seq_++, body}); }

  std::size_t stash(multi::Message&& m) {
    if (free_.empty()) {
      pool_.push_back(std::move(m));
      return pool_.size() - 1;
    }
    const auto i = free_.back();
    free_.pop_back();
    pool_[i] = std::move(m);
    return i;
  }

  void emit(ordered_json line) {
    if (!trace_) return;
    *trace_ << line.dump() << '\n';
  }

  ordered_json line(std::string_view event) const {
    ordered_json j;
    j["t"] = now_;
    j["event"] = std::string(event);
    return j;
  }

  bool draw(double p) {
    if (p <= 0) return false;
    if (p >= 1) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
  }

  TimeUs link_delay(std::uint32_t from, std::uint32_t to) {
    if (cfg_.latency.kind == LatencyModel::Kind::kUniform) {
      return std::uniform_int_distribution<TimeUs>(cfg_.latency.min_us, cfg_.latency.max_us)(rng_);
    }
    return links_[from][to];
  }

  // Network send. Client links are reliable and never partitioned.
  void send(multi::Message m) {
    ++sent_by_type_[m.body.index()];
    if (m.src.kind == Endpoint::Kind::kReplica) ++metrics_.sent_per_replica[m.src.index];
    if (multi::is_protocol_message(m.body)) {
      if (auto slot = multi::message_slot(m.body)) ++slot_msgs_[*slot];
    }
    if (const auto* acc = std::get_if<multi::Accept>(&m.body)) record_vote(*acc);
    if (metrics_.violation) return;

    ordered_json j;
    if (trace_) {
      j = line("send");
      j["msg"] = multi::to_json(m);
    }
    if (m.src.kind == Endpoint::Kind::kClient || m.dst.kind == Endpoint::Kind::kClient) {
      if (trace_) j["delay_us"] = client_latency_;
      emit(std::move(j));
      push(now_ + client_latency_, Deliver{stash(std::move(m))});
      return;
    }
    const auto from = m.src.index;
    const auto to = m.dst.index;
    if (from == to) {
      if (trace_) j["delay_us"] = 0;
      emit(std::move(j));
      push(now_, Deliver{stash(std::move(m))});
      return;
    }
    if (group_[from] != group_[to]) {
      ++metrics_.dropped;
      if (trace_) j["dropped"] = "partitioned";
      emit(std::move(j));
      return;
    }
    if (draw(cfg_.loss)) {
      ++metrics_.dropped;
      if (trace_) j["dropped"] = "lost";
      emit(std::move(j));
      return;
    }
    const TimeUs delay = link_delay(from, to);
    if (trace_) j["delay_us"] = delay;
    if (draw(cfg_.duplicate)) {
      const TimeUs again = link_delay(from, to);
      if (trace_) j["duplicate_delay_us"] = again;
      ++metrics_.duplicated;
      push(now_ + again, Deliver{stash(multi::Message(m))});
    }
    emit(std::move(j));
    push(now_ + delay, Deliver{stash(std::move(m))});
  }

  // Every accept is a vote that stays in the history even if the acceptor
  // later forgets it.
  void record_vote(const multi::Accept& acc) {
    const auto& st = replicas_[acc.sender.index].slot_state(acc.slot);
    if (!st.accepted || st.accepted->ballot != acc.ballot) return;
    const Accepted vote = *st.accepted;
    auto& voters = votes_[acc.slot][vote];
    voters.insert(acc.sender);
    if (!cfg_.quorums.is_q2(voters)) return;
    auto [it, inserted] = decided_.emplace(acc.slot, vote);
    if (inserted) {
      metrics_.decisions.emplace_back(now_, acc.slot);
      if (!trace_) return;
      auto j = line("decide");
      j["slot"] = acc.slot.index;
      j["ballot"] = ballot_to_json(vote.ballot);
      j["value"] = vote.value.bytes;
      j["quorum"] = voters.to_string();
      emit(std::move(j));
      return;
    }
    if (it->second.value != vote.value) {
      violate(acc.slot, it->second, vote, "two values decided in the same slot");
    }
  }

  void violate(Slot slot, const Accepted& first, const Accepted& second, std::string detail) {
    if (metrics_.violation) return;
    metrics_.violation = SafetyViolation{now_, slot, first, second, detail};
    auto j = line("violation");
    j["slot"] = slot.index;
    j["first"] = {{"ballot", ballot_to_json(first.ballot)}, {"value", first.value.bytes}};
    j["second"] = {{"ballot", ballot_to_json(second.ballot)}, {"value", second.value.bytes}};
    j["detail"] = std::move(detail);
    emit(std::move(j));
  }

  void absorb(std::uint32_t r, multi::Output&& out) {
    for (auto& note : trace_ ? out.notes : std::vector<std::string>{}) {
      auto j = line("note");
      j["replica"] = r;
      j["text"] = note;
      emit(std::move(j));
    }
    if (out.became_leader) {
      metrics_.leader_events.push_back(LeaderEvent{now_, r, replicas_[r].ballot()});
      auto j = line("leader");
      j["replica"] = r;
      j["ballot"] = ballot_to_json(replicas_[r].ballot());
      emit(std::move(j));
    }
    for (auto slot : out.decided) {
      const auto& mine = replicas_[r].log().at(slot);
      auto it = decided_.find(slot);
      if (it == decided_.end()) {
        violate(slot, mine, mine, "replica R" + std::to_string(r) + " learned an undecided value");
      } else if (it->second.value != mine.value) {
        violate(slot, it->second, mine, "replica R" + std::to_string(r) + " learned a different value");
      }
    }
    for (auto& m : out.messages) {
      if (metrics_.violation) return;
      send(std::move(m));
    }
  }

  void handle(Deliver& d) {
    const multi::Message m = std::move(pool_[d.pooled]);
    free_.push_back(d.pooled);
    if (m.dst.kind == Endpoint::Kind::kClient) {
      client_receive(m);
      return;
    }
    const auto r = m.dst.index;
    if (crashed_[r]) {
      if (trace_) {
        auto j = line("drop");
        j["msg"] = multi::to_json(m);
        j["reason"] = "crashed";
        emit(std::move(j));
      }
      ++metrics_.dropped;
      return;
    }
    ++metrics_.received_per_replica[r];
    if (trace_) {
      auto j = line("deliver");
      j["msg"] = multi::to_json(m);
      emit(std::move(j));
    }
    absorb(r, replicas_[r].on_message(m, now_));
  }

  void handle(Tick& t) {
    push(now_ + cfg_.tick_us, Tick{t.replica});
    if (crashed_[t.replica]) return;
    absorb(t.replica, replicas_[t.replica].on_tick(now_));
  }

  void handle(ClientTick&) {
    push(now_ + cfg_.tick_us, ClientTick{});
    while (outstanding_.size() < cfg_.client_window) client_issue();
    for (auto& [id, o] : outstanding_) {
      if (now_ - o.last_sent >= cfg_.client_timeout_us) client_send(id, o);
    }
  }

  void handle(Scheduled& s) {
    std::visit([this](const auto& e) { apply(e); }, schedule_[s.index]);
  }

  void apply(const CrashEvent& c) {
    auto j = line("crash");
    j["replica"] = c.replica;
    j["lose_memory"] = c.lose_memory;
    emit(std::move(j));
    if (crashed_[c.replica]) return;
    crashed_[c.replica] = true;
    lose_memory_[c.replica] = c.lose_memory;
  }

  void apply(const RestoreEvent& r) {
    auto j = line("restore");
    j["replica"] = r.replica;
    emit(std::move(j));
    if (!crashed_[r.replica]) return;
    crashed_[r.replica] = false;
    replicas_[r.replica].restart(lose_memory_[r.replica]);
  }

  void apply(const ElectEvent& e) {
    auto j = line("elect");
    j["replica"] = e.replica;
    j["crashed"] = static_cast<bool>(crashed_[e.replica]);
    emit(std::move(j));
    const bool moved = leader_ != e.replica;
    leader_ = e.replica;
    if (!crashed_[e.replica]) absorb(e.replica, replicas_[e.replica].become_leader(now_));
    if (moved) {
      for (auto& [id, o] : outstanding_) client_send(id, o);
    }
  }

  void apply(const PartitionEvent& p) {
    auto j = line("partition");
    auto groups = ordered_json::array();
    for (const auto& g : p.groups) groups.push_back(g.to_string());
    j["groups"] = std::move(groups);
    emit(std::move(j));
    std::fill(group_.begin(), group_.end(), static_cast<int>(p.groups.size()));
    if (p.groups.empty()) std::fill(group_.begin(), group_.end(), 0);
    for (std::size_t gi = 0; gi < p.groups.size(); ++gi) {
      for (auto a : p.groups[gi].members()) group_[a.index] = static_cast<int>(gi);
    }
  }

  static Value payload(std::uint64_t id) { return Value{"r" + std::to_string(id)}; }

  void client_issue() {
    const auto id = next_request_++;
    auto& o = outstanding_[id];
    o.first_sent = now_;
    client_send(id, o);
  }

  void client_send(std::uint64_t id, Outstanding& o) {
    o.last_sent = now_;
    send(multi::Message{Endpoint::client(), Endpoint::replica(leader_), multi::ClientRequest{id, payload(id)}});
  }

  void client_receive(const multi::Message& m) {
    if (trace_) {
      auto j = line("deliver");
      j["msg"] = multi::to_json(m);
      emit(std::move(j));
    }
    const auto* resp = std::get_if<multi::ClientResponse>(&m.body);
    if (!resp) return;  // rejections are retried on timeout
    auto it = outstanding_.find(resp->id);
    if (it == outstanding_.end()) return;
    const TimeUs latency = now_ - it->second.first_sent;
    outstanding_.erase(it);
    ++metrics_.completed_requests;
    metrics_.completions.push_back(now_);
    if (in_window(now_)) {
      ++metrics_.window_completed;
      latencies_.push_back(latency);
    }
    client_issue();
  }

  bool in_window(TimeUs t) const { return t >= cfg_.warmup_us && t < cfg_.duration_us - cfg_.cooldown_us; }

  void finish() {
    for (std::size_t i = 0; i < sent_by_type_.size(); ++i) {
      if (sent_by_type_[i] == 0) continue;
      multi::MessageBody probe;
      switch (i) {
        case 0: probe = multi::Prepare{}; break;
        case 1: probe = multi::Promise{}; break;
        case 2: probe = multi::Propose{}; break;
        case 3: probe = multi::Accept{}; break;
        case 4: probe = multi::Nack{}; break;
        case 5: probe = multi::ClientRequest{}; break;
        case 6: probe = multi::ClientResponse{}; break;
        default: probe = multi::ClientReject{}; break;
      }
      metrics_.messages_by_type[std::string(multi::message_type(probe))] = sent_by_type_[i];
    }
    metrics_.committed_slots = decided_.size();
    metrics_.window_seconds = static_cast<double>(cfg_.duration_us - cfg_.warmup_us - cfg_.cooldown_us) / 1e6;
    metrics_.throughput = static_cast<double>(metrics_.window_completed) / metrics_.window_seconds;
    if (!latencies_.empty()) {
      std::sort(latencies_.begin(), latencies_.end());
      const auto n = latencies_.size();
      const auto total = std::accumulate(latencies_.begin(), latencies_.end(), TimeUs{0});
      metrics_.mean_latency_ms = static_cast<double>(total) / static_cast<double>(n) / kMs;
      metrics_.median_latency_ms =
          n % 2 ? ms(latencies_[n / 2]) : static_cast<double>(latencies_[n / 2 - 1] + latencies_[n / 2]) / 2 / kMs;
      const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
      metrics_.p99_latency_ms = ms(latencies_[std::max<std::size_t>(rank, 1) - 1]);
    }
    std::uint64_t slots = 0;
    std::uint64_t msgs = 0;
    for (const auto& [at, slot] : metrics_.decisions) {
      if (!in_window(at)) continue;
      ++slots;
      msgs += slot_msgs_[slot];
    }
    if (slots > 0) {
      metrics_.protocol_msgs_per_commit = static_cast<double>(msgs) / static_cast<double>(slots);
      metrics_.msgs_per_commit = metrics_.protocol_msgs_per_commit + 2;
    }
  }

  const SimConfig& cfg_;
  std::ostream* trace_;
  std::mt19937_64 rng_;
  std::vector<std::vector<TimeUs>> links_;
  TimeUs client_latency_ = 0;

  std::vector<multi::Replica> replicas_;
  std::vector<bool> crashed_;
  std::vector<bool> lose_memory_;
  std::vector<int> group_;
  std::vector<ScheduleItem> schedule_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::vector<multi::Message> pool_;
  std::vector<std::size_t> free_;
  TimeUs now_ = 0;

  std::uint32_t leader_ = 0;
  std::uint64_t next_request_ = 1;
  std::map<std::uint64_t, Outstanding> outstanding_;
  std::vector<TimeUs> latencies_;

  std::map<Slot, std::map<Accepted, AcceptorSet>> votes_;
  std::map<Slot, Accepted> decided_;
  std::map<Slot, std::uint64_t> slot_msgs_;
  std::array<std::uint64_t, std::variant_size_v<multi::MessageBody>> sent_by_type_{};

  RunMetrics metrics_;
};

TimeUs us_from_ms(const nlohmann::json& j) { return static_cast<TimeUs>(std::llround(j.get<double>() * kMs)); }

}  // namespace

RunMetrics run(const SimConfig& cfg, std::ostream* trace) {
  cfg.validate();
  World world(cfg, trace);
  return world.run();
}

nlohmann::ordered_json metrics_to_json(const SimConfig& cfg, const RunMetrics& m) {
  ordered_json j;
  nlohmann::json plain;
  to_json(plain, cfg.quorums);
  j["quorum"] = plain;
  j["n"] = cfg.n();
  j["q1"] = cfg.quorums.min_q1_size();
  j["q2"] = cfg.quorums.min_q2_size();
  j["seed"] = cfg.seed;
  j["committed_slots"] = m.committed_slots;
  j["completed_requests"] = m.completed_requests;
  j["window_completed"] = m.window_completed;
  j["window_seconds"] = m.window_seconds;
  j["throughput"] = m.throughput;
  j["goodput_bytes_per_s"] = m.throughput * static_cast<double>(cfg.request_size);
  j["mean_lat"] = m.mean_latency_ms;
  j["median_lat"] = m.median_latency_ms;
  j["p99_lat"] = m.p99_latency_ms;
  j["protocol_msgs_per_commit"] = m.protocol_msgs_per_commit;
  j["msgs_per_commit"] = m.msgs_per_commit;
  ordered_json by_type = ordered_json::object();
  for (const auto& [type, count] : m.messages_by_type) by_type[type] = count;
  j["messages_by_type"] = std::move(by_type);
  j["sent_per_replica"] = m.sent_per_replica;
  j["received_per_replica"] = m.received_per_replica;
  j["dropped"] = m.dropped;
  j["duplicated"] = m.duplicated;
  auto leaders = ordered_json::array();
  for (const auto& e : m.leader_events) {
    leaders.push_back(ordered_json{{"t", e.at}, {"replica", e.replica}, {"ballot", ballot_to_json(e.ballot)}});
  }
  j["leader_events"] = std::move(leaders);
  if (m.violation) {
    const auto& v = *m.violation;
    j["violation"] = ordered_json{{"t", v.at},
                                  {"slot", v.slot.index},
                                  {"first", ordered_json{{"ballot", ballot_to_json(v.first.ballot)}, {"value", v.first.value.bytes}}},
                                  {"second", ordered_json{{"ballot", ballot_to_json(v.second.ballot)}, {"value", v.second.value.bytes}}},
                                  {"detail", v.detail}};
  } else {
    j["violation"] = nullptr;
  }
  j["events"] = m.events;
  return j;
}

std::string csv_header() { return "n,kind,q1,q2,seed,throughput,mean_lat,p99_lat,msgs_per_commit"; }

std::string csv_row(const SimConfig& cfg, const RunMetrics& m) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
  };
  std::ostringstream os;
  os << cfg.n() << ',' << to_string(cfg.quorums.kind()) << ',' << cfg.quorums.min_q1_size() << ','
     << cfg.quorums.min_q2_size() << ',' << cfg.seed << ',' << num(m.throughput) << ',' << num(m.mean_latency_ms)
     << ',' << num(m.p99_latency_ms) << ',' << num(m.msgs_per_commit);
  return os.str();
}

nlohmann::ordered_json to_json(const SimConfig& cfg) {
  ordered_json j;
  nlohmann::json qs;
  to_json(qs, cfg.quorums);
  j["quorum"] = qs;
  j["seed"] = cfg.seed;
  j["latency"] = ordered_json{{"kind", std::string(to_string(cfg.latency.kind))},
                              {"fixed_ms", ms(cfg.latency.fixed_us)},
                              {"min_ms", ms(cfg.latency.min_us)},
                              {"max_ms", ms(cfg.latency.max_us)}};
  j["client_latency_ms"] = cfg.client_latency_us ? ordered_json(ms(*cfg.client_latency_us)) : ordered_json(nullptr);
  j["loss"] = cfg.loss;
  j["duplicate"] = cfg.duplicate;
  auto crashes = ordered_json::array();
  for (const auto& c : cfg.crashes) {
    crashes.push_back(ordered_json{{"t_ms", ms(c.at)}, {"replica", c.replica}, {"lose_memory", c.lose_memory}});
  }
  j["crashes"] = std::move(crashes);
  auto restores = ordered_json::array();
  for (const auto& r : cfg.restores) restores.push_back(ordered_json{{"t_ms", ms(r.at)}, {"replica", r.replica}});
  j["restores"] = std::move(restores);
  auto elections = ordered_json::array();
  for (const auto& e : cfg.elections) elections.push_back(ordered_json{{"t_ms", ms(e.at)}, {"replica", e.replica}});
  j["elections"] = std::move(elections);
  auto partitions = ordered_json::array();
  for (const auto& p : cfg.partitions) {
    auto groups = ordered_json::array();
    for (const auto& g : p.groups) {
      auto ids = ordered_json::array();
      for (auto a : g.members()) ids.push_back(a.index);
      groups.push_back(std::move(ids));
    }
    partitions.push_back(ordered_json{{"t_ms", ms(p.at)}, {"groups", std::move(groups)}});
  }
  j["partitions"] = std::move(partitions);
  j["initial_leader"] = cfg.initial_leader;
  j["request_size"] = cfg.request_size;
  j["client_window"] = cfg.client_window;
  j["client_timeout_ms"] = ms(cfg.client_timeout_us);
  j["duration_ms"] = ms(cfg.duration_us);
  j["warmup_ms"] = ms(cfg.warmup_us);
  j["cooldown_ms"] = ms(cfg.cooldown_us);
  j["tick_ms"] = ms(cfg.tick_us);
  j["strategy"] = std::string(multi::to_string(cfg.strategy));
  j["send_to_all"] = cfg.send_to_all;
  j["replica_window"] = cfg.replica_window;
  j["retry_timeout_ms"] = ms(cfg.retry_timeout_us);
  return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  if (j.contains("quorum")) cfg.quorums = quorum_system_from_json(j.at("quorum"));
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    if (l.contains("kind")) cfg.latency.kind = latency_kind_from_string(l.at("kind").get<std::string>());
    if (l.contains("fixed_ms")) cfg.latency.fixed_us = us_from_ms(l.at("fixed_ms"));
    if (l.contains("min_ms")) cfg.latency.min_us = us_from_ms(l.at("min_ms"));
    if (l.contains("max_ms")) cfg.latency.max_us = us_from_ms(l.at("max_ms"));
  }
  if (j.contains("client_latency_ms") && !j.at("client_latency_ms").is_null()) {
    cfg.client_latency_us = us_from_ms(j.at("client_latency_ms"));
  }
  if (j.contains("loss")) cfg.loss = j.at("loss").get<double>();
  if (j.contains("duplicate")) cfg.duplicate = j.at("duplicate").get<double>();
  for (const auto& c : j.value("crashes", nlohmann::json::array())) {
    cfg.crashes.push_back(CrashEvent{us_from_ms(c.at("t_ms")), c.at("replica").get<std::uint32_t>(),
                                     c.value("lose_memory", false)});
  }
  for (const auto& r : j.value("restores", nlohmann::json::array())) {
    cfg.restores.push_back(RestoreEvent{us_from_ms(r.at("t_ms")), r.at("replica").get<std::uint32_t>()});
  }
  for (const auto& e : j.value("elections", nlohmann::json::array())) {
    cfg.elections.push_back(ElectEvent{us_from_ms(e.at("t_ms")), e.at("replica").get<std::uint32_t>()});
  }
  for (const auto& p : j.value("partitions", nlohmann::json::array())) {
    PartitionEvent ev{us_from_ms(p.at("t_ms")), {}};
    for (const auto& g : p.at("groups")) {
      AcceptorSet set;
      for (const auto& a : g) set.insert(AcceptorId{a.get<std::uint32_t>()});
      ev.groups.push_back(set);
    }
    cfg.partitions.push_back(std::move(ev));
  }
  if (j.contains("initial_leader")) cfg.initial_leader = j.at("initial_leader").get<std::uint32_t>();
  if (j.contains("request_size")) cfg.request_size = j.at("request_size").get<std::size_t>();
  if (j.contains("client_window")) cfg.client_window = j.at("client_window").get<std::size_t>();
  if (j.contains("client_timeout_ms")) cfg.client_timeout_us = us_from_ms(j.at("client_timeout_ms"));
  if (j.contains("duration_ms")) cfg.duration_us = us_from_ms(j.at("duration_ms"));
  if (j.contains("warmup_ms")) cfg.warmup_us = us_from_ms(j.at("warmup_ms"));
  if (j.contains("cooldown_ms")) cfg.cooldown_us = us_from_ms(j.at("cooldown_ms"));
  if (j.contains("tick_ms")) cfg.tick_us = us_from_ms(j.at("tick_ms"));
  if (j.contains("strategy")) cfg.strategy = multi::target_strategy_from_string(j.at("strategy").get<std::string>());
  if (j.contains("send_to_all")) cfg.send_to_all = j.at("send_to_all").get<bool>();
  if (j.contains("replica_window")) cfg.replica_window = j.at("replica_window").get<std::size_t>();
  if (j.contains("retry_timeout_ms")) cfg.retry_timeout_us = us_from_ms(j.at("retry_timeout_ms"));
  return cfg;
}

namespace {

std::map<std::string, std::string> parse_fields(std::string_view text) {
  std::map<std::string, std::string> fields;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const auto item = text.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (item.empty() || eq == std::string_view::npos || eq == 0) {
      throw std::invalid_argument("expected key=value in '" + std::string(text) + "'");
    }
    fields[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  return fields;
}

double parse_number(const std::string& s, const std::string& key) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number for " + key + ": '" + s + "'");
  }
  return v;
}

std::uint32_t parse_index(const std::string& s, const std::string& key) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad index for " + key + ": '" + s + "'");
  }
  return v;
}

void reject_unknown(const std::map<std::string, std::string>& f, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : f) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw std::invalid_argument("unknown field '" + k + "'");
    }
  }
}

TimeUs field_time(const std::map<std::string, std::string>& f) {
  auto it = f.find("t");
  if (it == f.end()) throw std::invalid_argument("missing t=<ms>");
  const double v = parse_number(it->second, "t");
  if (v < 0) throw std::invalid_argument("t must be non-negative");
  return static_cast<TimeUs>(std::llround(v * kMs));
}

std::uint32_t field_replica(const std::map<std::string, std::string>& f) {
  auto it = f.find("r");
  if (it == f.end()) throw std::invalid_argument("missing r=<replica>");
  return parse_index(it->second, "r");
}

}  // namespace

CrashEvent parse_crash(std::string_view text) {
  const auto f = parse_fields(text);
  reject_unknown(f, {"t", "r", "lose"});
  CrashEvent c{field_time(f), field_replica(f), false};
  if (auto it = f.find("lose"); it != f.end()) {
    if (it->second != "0" && it->second != "1") throw std::invalid_argument("lose must be 0 or 1");
    c.lose_memory = it->second == "1";
  }
  return c;
}

RestoreEvent parse_restore(std::string_view text) {
  const auto f = parse_fields(text);
  reject_unknown(f, {"t", "r"});
  return RestoreEvent{field_time(f), field_replica(f)};
}

ElectEvent parse_elect(std::string_view text) {
  const auto f = parse_fields(text);
  reject_unknown(f, {"t", "r"});
  return ElectEvent{field_time(f), field_replica(f)};
}

PartitionEvent parse_partition(std::string_view text) {
  const auto f = parse_fields(text);
  reject_unknown(f, {"t", "groups"});
  PartitionEvent p{field_time(f), {}};
  auto it = f.find("groups");
  if (it == f.end() || it->second.empty()) return p;
  std::string_view rest = it->second;
  while (true) {
    const auto bar = rest.find('|');
    const auto group = rest.substr(0, bar);
    AcceptorSet set;
    std::size_t pos = 0;
    while (pos <= group.size()) {
      const auto dot = std::min(group.find('.', pos), group.size());
      set.insert(AcceptorId{parse_index(std::string(group.substr(pos, dot - pos)), "groups")});
      pos = dot + 1;
    }
    p.groups.push_back(set);
    if (bar == std::string_view::npos) break;
    rest = rest.substr(bar + 1);
  }
  return p;
}

}  // namespace fpaxos::sim
