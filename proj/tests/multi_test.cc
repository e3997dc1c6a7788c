#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>

#include "fpaxos/multi.h"

namespace fpaxos::multi {
namespace {

// Minimal in-memory network: replicas plus a FIFO (or shuffled) mailbox.
struct Net {
  std::vector<Replica> replicas;
  std::deque<Message> inbox;
  std::vector<ClientResponse> responses;
  std::vector<ClientReject> rejects;
  std::size_t protocol_sent = 0;
  TimeUs now = 0;

  Net(const QuorumSystem& qs, ReplicaOptions opts = {}) {
    for (std::uint32_t i = 0; i < qs.n(); ++i) replicas.emplace_back(AcceptorId{i}, qs, opts);
  }

  void absorb(Output&& out) {
    for (auto& m : out.messages) {
      if (is_protocol_message(m.body)) ++protocol_sent;
      if (m.dst.kind == Endpoint::Kind::kClient) {
        if (auto* r = std::get_if<ClientResponse>(&m.body)) responses.push_back(*r);
        if (auto* r = std::get_if<ClientReject>(&m.body)) rejects.push_back(*r);
        continue;
      }
      inbox.push_back(std::move(m));
    }
  }

  void deliver_one() {
    auto m = std::move(inbox.front());
    inbox.pop_front();
    absorb(replicas[m.dst.index].on_message(m, now));
  }

  void drain() {
    while (!inbox.empty()) deliver_one();
  }

  void elect(std::uint32_t r) {
    absorb(replicas[r].become_leader(now));
    drain();
  }

  SubmitStatus submit(std::uint32_t r, std::uint64_t id, std::string payload) {
    auto res = replicas[r].submit(ClientRequest{id, Value{std::move(payload)}}, now);
    absorb(std::move(res.out));
    return res.status;
  }
};

Ballot B(std::uint64_t round, std::uint32_t p) { return Ballot{round, ProposerId{p}}; }

std::size_t count_type(const std::vector<Message>& msgs, std::string_view type) {
  return static_cast<std::size_t>(
      std::count_if(msgs.begin(), msgs.end(), [type](const Message& m) { return message_type(m.body) == type; }));
}

}  // namespace

TEST(BecomeLeader, FreshImprovedMajorityCluster) {
  Net net(make_majority(4, true));
  auto out = net.replicas[0].become_leader(0);
  EXPECT_EQ(count_type(out.messages, "prepare"), 3u);
  net.absorb(std::move(out));
  net.drain();
  EXPECT_TRUE(net.replicas[0].is_leader());
  EXPECT_EQ(net.replicas[0].next_slot(), Slot{0});
  EXPECT_EQ(net.protocol_sent, 6u);  // 3 prepare + 3 promise, no recovery proposals
}

TEST(BecomeLeader, RecoversAcceptedValueAndFillsGaps) {
  auto qs = make_majority(3, false);
  Net net(qs);
  // An earlier leader at ballot (2,0) got x accepted at slot 5 on R1 only.
  net.replicas[1].on_message(Message{Endpoint::replica(0), Endpoint::replica(1), Propose{B(2, 0), Slot{5}, Value{"x"}, Slot{0}}}, 0);
  net.absorb(net.replicas[2].become_leader(0));
  std::vector<Message> proposals;
  for (int attempt = 0; attempt < 3 && !net.replicas[2].is_leader(); ++attempt) {
    // The first ballot is too low and gets nacked; the retry tick picks a higher one.
    if (attempt > 0) {
      net.now += 1'000'000;
      net.absorb(net.replicas[2].on_tick(net.now));
    }
    while (!net.inbox.empty()) {
      if (std::holds_alternative<Propose>(net.inbox.front().body)) proposals.push_back(net.inbox.front());
      net.deliver_one();
    }
  }
  ASSERT_TRUE(net.replicas[2].is_leader());
  EXPECT_GT(net.replicas[2].ballot(), B(2, 0));
  bool saw_x = false;
  for (const auto& m : proposals) {
    const auto& p = std::get<Propose>(m.body);
    if (p.slot == Slot{5}) {
      EXPECT_EQ(p.value, Value{"x"});
      saw_x = true;
    } else {
      EXPECT_LT(p.slot, Slot{5});
      EXPECT_TRUE(is_noop(p.value));
    }
  }
  EXPECT_TRUE(saw_x);
  const auto& log = net.replicas[2].log();
  ASSERT_EQ(log.size(), 6u);
  EXPECT_EQ(log.at(Slot{5}).value, Value{"x"});
  EXPECT_EQ(net.replicas[2].next_slot(), Slot{6});
}

TEST(BecomeLeader, SingleReplica) {
  Net net(make_majority(1, false), ReplicaOptions{.window = 4});
  net.elect(0);
  EXPECT_TRUE(net.replicas[0].is_leader());
  for (std::uint64_t i = 0; i < 4; ++i) EXPECT_EQ(net.submit(0, i, "v" + std::to_string(i)), SubmitStatus::kAccepted);
  net.drain();
  EXPECT_EQ(net.responses.size(), 4u);
  EXPECT_EQ(net.replicas[0].open_client_slots(), 0u);
}

TEST(Submit, SimpleQuorumUsesThreeAcceptorsPerSlot) {
  Net net(make_simple(10, 3));
  net.elect(0);
  const auto before = net.protocol_sent;
  auto res = net.replicas[0].submit(ClientRequest{1, Value{"payload"}}, 0);
  EXPECT_EQ(count_type(res.out.messages, "propose"), 3u);
  net.absorb(std::move(res.out));
  net.drain();
  EXPECT_EQ(net.protocol_sent - before, 6u);
  ASSERT_EQ(net.responses.size(), 1u);
  EXPECT_EQ(net.responses[0].slot, Slot{0});
}

TEST(Submit, WindowBackpressure) {
  Net net(make_majority(3, false), ReplicaOptions{.window = 10});
  net.elect(0);
  for (std::uint64_t i = 0; i < 10; ++i) EXPECT_EQ(net.submit(0, i, "r"), SubmitStatus::kAccepted);
  EXPECT_EQ(net.submit(0, 10, "r"), SubmitStatus::kBackpressure);
  net.drain();
  EXPECT_EQ(net.submit(0, 10, "r"), SubmitStatus::kAccepted);
}

TEST(Submit, NonLeaderRedirects) {
  Net net(make_majority(3, false));
  EXPECT_EQ(net.submit(1, 1, "r"), SubmitStatus::kNotLeader);
  auto out = net.replicas[1].on_message(Message{Endpoint::client(), Endpoint::replica(1), ClientRequest{1, Value{"r"}}}, 0);
  ASSERT_EQ(out.messages.size(), 1u);
  EXPECT_EQ(std::get<ClientReject>(out.messages[0].body).reason, RejectReason::kNotLeader);
}

TEST(Submit, CandidateQueuesUntilElected) {
  Net net(make_majority(3, false));
  net.absorb(net.replicas[0].become_leader(0));
  EXPECT_EQ(net.submit(0, 7, "q"), SubmitStatus::kQueued);
  EXPECT_EQ(net.submit(0, 7, "q"), SubmitStatus::kDuplicate);
  net.drain();
  ASSERT_EQ(net.responses.size(), 1u);
  EXPECT_EQ(net.responses[0].id, 7u);
}

TEST(OnMessage, ProposeCreatesSlotState) {
  Replica r(AcceptorId{0}, make_majority(3, false));
  auto out = r.on_message(Message{Endpoint::replica(1), Endpoint::replica(0), Propose{B(1, 1), Slot{3}, Value{"v"}, Slot{0}}}, 0);
  ASSERT_EQ(out.messages.size(), 1u);
  EXPECT_EQ(std::get<Accept>(out.messages[0].body), (Accept{B(1, 1), Slot{3}, AcceptorId{0}}));
  EXPECT_EQ(r.slot_state(Slot{3}).accepted, (Accepted{B(1, 1), Value{"v"}}));
}

TEST(OnMessage, DuplicateAcceptAfterDecisionIsNoop) {
  Net net(make_majority(3, false));
  net.elect(0);
  net.submit(0, 1, "a");
  net.drain();
  const auto log_before = net.replicas[0].log();
  auto out = net.replicas[0].on_message(Message{Endpoint::replica(1), Endpoint::replica(0), Accept{net.replicas[0].ballot(), Slot{0}, AcceptorId{1}}}, 0);
  EXPECT_TRUE(out.messages.empty());
  EXPECT_TRUE(out.decided.empty());
  EXPECT_EQ(net.replicas[0].log(), log_before);
}

TEST(OnMessage, StalePrepareNacked) {
  Replica r(AcceptorId{0}, make_majority(3, false));
  r.on_message(Message{Endpoint::replica(1), Endpoint::replica(0), Prepare{B(5, 1), Slot{0}}}, 0);
  auto out = r.on_message(Message{Endpoint::replica(2), Endpoint::replica(0), Prepare{B(3, 2), Slot{0}}}, 0);
  ASSERT_EQ(out.messages.size(), 1u);
  EXPECT_EQ(std::get<Nack>(out.messages[0].body).promised, B(5, 1));
}

TEST(OnMessage, MalformedDropped) {
  Replica r(AcceptorId{0}, make_majority(3, false));
  auto out = r.on_message(Message{Endpoint::replica(1), Endpoint::replica(0), Accept{B(1, 0), Slot{0}, AcceptorId{2}}}, 0);
  EXPECT_TRUE(out.messages.empty());
  ASSERT_EQ(out.notes.size(), 1u);
  out = r.on_message(Message{Endpoint::replica(9), Endpoint::replica(0), Prepare{B(1, 0), Slot{0}}}, 0);
  EXPECT_TRUE(out.messages.empty());
  EXPECT_FALSE(out.notes.empty());
}

TEST(Preemption, OldLeaderStepsDownOnNack) {
  Net net(make_majority(3, false));
  net.elect(0);
  net.elect(1);
  ASSERT_TRUE(net.replicas[1].is_leader());
  net.submit(0, 1, "late");
  net.drain();
  EXPECT_FALSE(net.replicas[0].is_leader());
  EXPECT_TRUE(net.responses.empty());
}

TEST(Learning, FollowersLearnThroughCommitPiggyback) {
  Net net(make_majority(3, false));
  net.elect(0);
  for (std::uint64_t i = 0; i < 5; ++i) {
    net.submit(0, i, "v" + std::to_string(i));
    net.drain();
  }
  // R1 is in every phase-2 quorum under fixed-first; it learns all but the last.
  EXPECT_EQ(net.replicas[1].log().size(), 4u);
  EXPECT_EQ(net.replicas[0].log().size(), 5u);
}

TEST(Restart, DurableStateSurvivesCrash) {
  Net net(make_majority(3, false));
  net.elect(0);
  net.submit(0, 1, "a");
  net.drain();
  auto promised = net.replicas[1].promised();
  net.replicas[1].restart(false);
  EXPECT_EQ(net.replicas[1].promised(), promised);
  EXPECT_TRUE(net.replicas[1].slot_state(Slot{0}).accepted.has_value());
  net.replicas[1].restart(true);
  EXPECT_FALSE(net.replicas[1].promised().has_value());
  EXPECT_TRUE(net.replicas[1].slots().empty());
}

TEST(LogProperties, RandomScheduleAgreementAndLeaderCompleteness) {
  const std::vector<QuorumSystem> systems{make_majority(4, true), make_simple(5, 2), make_grid(2, 3, GridMode::kFPaxos),
                                          make_majority(3, false)};
  for (const auto& qs : systems) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      std::mt19937_64 rng(seed);
      ReplicaOptions opts{.window = 3, .strategy = TargetStrategy::kRandom, .seed = seed};
      Net net(qs, opts);
      std::map<Slot, Value> chosen;  // first decision observed anywhere
      std::uint64_t next_id = 0;
      for (int step = 0; step < 400; ++step) {
        net.now += 1000;
        const auto roll = rng() % 100;
        if (roll < 3) {
          net.absorb(net.replicas[rng() % qs.n()].become_leader(net.now));
        } else if (roll < 20) {
          const auto r = static_cast<std::uint32_t>(rng() % qs.n());
          net.absorb(net.replicas[r].submit(ClientRequest{next_id, Value{"c" + std::to_string(next_id)}}, net.now).out);
          ++next_id;
        } else if (!net.inbox.empty()) {
          // Random delivery order with 10% loss and 5% duplication.
          const auto idx = rng() % net.inbox.size();
          std::swap(net.inbox[idx], net.inbox.front());
          const auto fate = rng() % 100;
          if (fate < 10) {
            net.inbox.pop_front();
          } else {
            if (fate < 15) net.inbox.push_back(net.inbox.front());
            net.deliver_one();
          }
        }
        for (const auto& r : net.replicas) {
          for (const auto& [slot, acc] : r.log()) {
            auto [it, inserted] = chosen.emplace(slot, acc.value);
            ASSERT_EQ(it->second, acc.value) << qs.describe() << " seed " << seed << " slot " << slot.index;
          }
        }
      }
      // Finish: elect a leader and let everything settle; the new leader's
      // log must contain every value chosen so far.
      const auto last = static_cast<std::uint32_t>(rng() % qs.n());
      net.drain();
      net.elect(last);
      for (int attempt = 0; attempt < 5 && !net.replicas[last].is_leader(); ++attempt) {
        net.now += 1'000'000;
        net.absorb(net.replicas[last].on_tick(net.now));
        net.drain();
      }
      ASSERT_TRUE(net.replicas[last].is_leader()) << qs.describe() << " seed " << seed;
      for (const auto& [slot, value] : chosen) {
        ASSERT_TRUE(net.replicas[last].log().contains(slot)) << qs.describe() << " seed " << seed;
        EXPECT_EQ(net.replicas[last].log().at(slot).value, value);
      }
    }
  }
}

TEST(MultiMessageJson, RoundTrip) {
  std::vector<Message> msgs{
      {Endpoint::replica(0), Endpoint::replica(1), Prepare{B(2, 0), Slot{4}}},
      {Endpoint::replica(1), Endpoint::replica(0),
       Promise{B(2, 0), Slot{4}, {SlotAccepted{Slot{4}, Accepted{B(1, 1), Value{"x"}}}}, AcceptorId{1}}},
      {Endpoint::replica(0), Endpoint::replica(1), Propose{B(2, 0), Slot{4}, Value{"x"}, Slot{3}}},
      {Endpoint::replica(1), Endpoint::replica(0), Accept{B(2, 0), Slot{4}, AcceptorId{1}}},
      {Endpoint::replica(1), Endpoint::replica(0), Nack{B(2, 0), B(3, 2), Slot{4}, AcceptorId{1}}},
      {Endpoint::replica(1), Endpoint::replica(0), Nack{B(2, 0), B(3, 2), std::nullopt, AcceptorId{1}}},
      {Endpoint::client(), Endpoint::replica(0), ClientRequest{9, Value{"req"}}},
      {Endpoint::replica(0), Endpoint::client(), ClientResponse{9, Slot{4}, Value{"req"}}},
      {Endpoint::replica(0), Endpoint::client(), ClientReject{9, RejectReason::kBackpressure}},
  };
  for (const auto& m : msgs) {
    const auto text = to_json(m).dump();
    EXPECT_EQ(message_from_json(nlohmann::json::parse(text)), m) << text;
  }
  EXPECT_EQ(to_json(msgs[3]).dump(), R"({"type":"accept","ballot":[2,0],"slot":4,"src":"R1","dst":"R0"})");
}

TEST(LogJson, Dump) {
  std::map<Slot, Accepted> log{{Slot{0}, Accepted{B(1, 0), Value{"a"}}}, {Slot{1}, Accepted{B(1, 0), Value{""}}}};
  EXPECT_EQ(log_to_json(log).dump(),
            R"([{"slot":0,"ballot":[1,0],"value":"a"},{"slot":1,"ballot":[1,0],"value":""}])");
}

}  // namespace fpaxos::multi
