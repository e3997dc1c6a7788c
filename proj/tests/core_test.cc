#include <gtest/gtest.h>

#include <random>

#include "fpaxos/core.h"

using namespace fpaxos;

namespace {

Ballot B(std::uint64_t round, std::uint32_t proposer = 0) { return Ballot{round, ProposerId{proposer}}; }
Value V(const char* s) { return Value{s}; }
AcceptorId A(std::uint32_t i) { return AcceptorId{i}; }

}  // namespace

TEST(Ballot, OrdersByRoundThenProposer) {
  EXPECT_LT(B(1, 5), B(2, 0));
  EXPECT_LT(B(2, 0), B(2, 1));
  EXPECT_EQ(B(3, 1), B(3, 1));
}

TEST(AcceptorPrepare, FreshAcceptorPromises) {
  auto step = acceptor_handle_prepare(AcceptorState{}, Prepare{B(1)}, A(0));
  ASSERT_TRUE(step.granted());
  EXPECT_EQ(step.state.promised, B(1));
  EXPECT_EQ(std::get<Promise>(step.reply), (Promise{B(1), std::nullopt, A(0)}));
}

TEST(AcceptorPrepare, StaleBallotNacked) {
  AcceptorState st{B(2), std::nullopt};
  auto step = acceptor_handle_prepare(st, Prepare{B(1)}, A(0));
  EXPECT_FALSE(step.granted());
  EXPECT_EQ(step.state, st);
  EXPECT_EQ(std::get<Nack>(step.reply), (Nack{B(1), B(2), A(0)}));
}

TEST(AcceptorPrepare, EqualBallotNacked) {
  AcceptorState st{B(2), std::nullopt};
  EXPECT_FALSE(acceptor_handle_prepare(st, Prepare{B(2)}, A(0)).granted());
}

TEST(AcceptorPrepare, PromiseCarriesAcceptedPair) {
  AcceptorState st{B(1), Accepted{B(1), V("a")}};
  auto step = acceptor_handle_prepare(st, Prepare{B(2)}, A(1));
  ASSERT_TRUE(step.granted());
  EXPECT_EQ(step.state.promised, B(2));
  EXPECT_EQ(std::get<Promise>(step.reply).accepted, (Accepted{B(1), V("a")}));
}

TEST(AcceptorPropose, AcceptsAtPromise) {
  AcceptorState st{B(1), std::nullopt};
  auto step = acceptor_handle_propose(st, Propose{B(1), V("a")}, A(0));
  ASSERT_TRUE(step.granted());
  EXPECT_EQ(step.state.accepted, (Accepted{B(1), V("a")}));
  EXPECT_EQ(std::get<Accept>(step.reply), (Accept{B(1), A(0)}));
}

TEST(AcceptorPropose, RejectsBelowPromise) {
  AcceptorState st{B(2), std::nullopt};
  auto step = acceptor_handle_propose(st, Propose{B(1), V("a")}, A(0));
  EXPECT_FALSE(step.granted());
  EXPECT_EQ(step.state, st);
  EXPECT_EQ(std::get<Nack>(step.reply), (Nack{B(1), B(2), A(0)}));
}

TEST(AcceptorPropose, DuplicateIsIdempotent) {
  AcceptorState st{B(1), Accepted{B(1), V("a")}};
  auto step = acceptor_handle_propose(st, Propose{B(1), V("a")}, A(0));
  ASSERT_TRUE(step.granted());
  EXPECT_EQ(step.state, st);
}

TEST(AcceptorProperties, StateNeverMovesBackwards) {
  std::mt19937 rng(11);
  for (int run = 0; run < 200; ++run) {
    AcceptorState st;
    for (int i = 0; i < 30; ++i) {
      const auto b = B(rng() % 6, rng() % 3);
      auto step = rng() % 2 ? acceptor_handle_prepare(st, Prepare{b}, A(0))
                            : acceptor_handle_propose(st, Propose{b, Value{std::string(1, 'a' + rng() % 3)}}, A(0));
      if (st.promised) ASSERT_GE(*step.state.promised, *st.promised);
      if (st.accepted) ASSERT_GE(step.state.accepted->ballot, st.accepted->ballot);
      if (step.state.accepted) ASSERT_LE(step.state.accepted->ballot, *step.state.promised);
      st = step.state;
    }
  }
}

TEST(ProposerStart, SendsPrepareToEachTarget) {
  auto qs = make_majority(4, true);
  auto ps = ProposerState::make(ProposerId{0}, 1, V("a"));
  auto step = proposer_start(ps, qs, AcceptorSet{0, 1, 2});
  EXPECT_EQ(step.state.phase, ProposerPhase::kPhase1);
  ASSERT_EQ(step.out.size(), 3u);
  for (std::uint32_t i = 0; i < 3; ++i) {
    EXPECT_EQ(step.out[i].dst, Endpoint::acceptor(i));
    EXPECT_EQ(std::get<Prepare>(step.out[i].body).ballot, B(1));
  }
}

TEST(ProposerStart, SingleAcceptorCluster) {
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 1, V("x")), make_majority(1, false), AcceptorSet{0});
  EXPECT_EQ(step.out.size(), 1u);
}

TEST(ProposerStart, SimpleQuorumSendsOnlyToPhaseOneQuorum) {
  auto qs = make_simple(10, 3);
  auto targets = select_quorum(qs, Phase::kOne, qs.universe().members());
  ASSERT_TRUE(targets);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 1, V("x")), qs, *targets);
  EXPECT_EQ(step.out.size(), 8u);
}

TEST(ProposerStart, RejectsTargetsWithoutQuorum) {
  auto qs = make_majority(4, true);
  EXPECT_THROW(proposer_start(ProposerState::make(ProposerId{0}, 1, V("a")), qs, AcceptorSet{0, 1}),
               std::invalid_argument);
}

TEST(ProposerPromise, AdoptsPreviouslyAcceptedValue) {
  auto qs = make_majority(4, true);
  auto ps = ProposerState::make(ProposerId{1}, 2, V("b"));
  auto step = proposer_start(ps, qs, AcceptorSet{1, 2, 3});
  step = proposer_on_promise(step.state, qs, Promise{B(2, 1), std::nullopt, A(3)});
  step = proposer_on_promise(step.state, qs, Promise{B(2, 1), std::nullopt, A(2)});
  EXPECT_TRUE(step.out.empty());
  step = proposer_on_promise(step.state, qs, Promise{B(2, 1), Accepted{B(1), V("a")}, A(1)});
  EXPECT_EQ(step.state.phase, ProposerPhase::kPhase2);
  EXPECT_EQ(step.state.chosen_value, V("a"));
  ASSERT_EQ(step.out.size(), 2u);
  EXPECT_EQ(std::get<Propose>(step.out[0].body).value, V("a"));
}

TEST(ProposerPromise, FreeToChooseWhenNothingAccepted) {
  auto qs = make_majority(4, true);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 1, V("b")), qs, AcceptorSet{0, 1, 2});
  for (std::uint32_t i = 0; i < 3; ++i) step = proposer_on_promise(step.state, qs, Promise{B(1), std::nullopt, A(i)});
  EXPECT_EQ(step.state.chosen_value, V("b"));
}

TEST(ProposerPromise, HighestBallotWins) {
  auto qs = make_majority(3, false);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 4, V("z")), qs, qs.universe());
  step = proposer_on_promise(step.state, qs, Promise{B(4), Accepted{B(1), V("a")}, A(0)});
  step = proposer_on_promise(step.state, qs, Promise{B(4), Accepted{B(3), V("c")}, A(1)});
  EXPECT_EQ(step.state.chosen_value, V("c"));
}

TEST(ProposerPromise, StalePromiseIgnored) {
  auto qs = make_majority(3, false);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 4, V("z")), qs, qs.universe());
  auto after = proposer_on_promise(step.state, qs, Promise{B(3), std::nullopt, A(0)});
  EXPECT_TRUE(after.state.promises.empty());
  EXPECT_TRUE(after.out.empty());
}

TEST(ProposerPromise, UsesConfiguredPhaseTwoOrder) {
  auto qs = make_majority(4, true);
  auto ps = ProposerState::make(ProposerId{1}, 2, V("b"));
  ps.q2_order = {A(3), A(2), A(1), A(0)};
  auto step = proposer_start(ps, qs, AcceptorSet{1, 2, 3});
  for (std::uint32_t i : {3u, 2u, 1u}) step = proposer_on_promise(step.state, qs, Promise{B(2, 1), std::nullopt, A(i)});
  ASSERT_EQ(step.out.size(), 2u);
  EXPECT_EQ(step.out[0].dst, Endpoint::acceptor(2));
  EXPECT_EQ(step.out[1].dst, Endpoint::acceptor(3));
}

TEST(ProposerAccept, DecidesOnPhaseTwoQuorum) {
  auto qs = make_majority(4, true);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 1, V("a")), qs, AcceptorSet{0, 1, 2});
  for (std::uint32_t i = 0; i < 3; ++i) step = proposer_on_promise(step.state, qs, Promise{B(1), std::nullopt, A(i)});
  auto ps = proposer_on_accept(step.state, qs, Accept{B(1), A(0)});
  EXPECT_EQ(ps.phase, ProposerPhase::kPhase2);
  ps = proposer_on_accept(ps, qs, Accept{B(1), A(1)});
  EXPECT_EQ(ps.phase, ProposerPhase::kDecided);
}

TEST(ProposerAccept, GridColumnDecides) {
  auto qs = make_grid(4, 5, GridMode::kFPaxos);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 1, V("a")), qs, qs.grid_row(0));
  for (auto a : qs.grid_row(0).members()) step = proposer_on_promise(step.state, qs, Promise{B(1), std::nullopt, a});
  ASSERT_EQ(step.state.phase, ProposerPhase::kPhase2);
  auto ps = step.state;
  for (auto a : qs.grid_col(3).members()) ps = proposer_on_accept(ps, qs, Accept{B(1), a});
  EXPECT_EQ(ps.phase, ProposerPhase::kDecided);
}

TEST(ProposerAccept, StaleAcceptIgnored) {
  auto qs = make_majority(1, false);
  auto step = proposer_start(ProposerState::make(ProposerId{0}, 2, V("a")), qs, AcceptorSet{0});
  step = proposer_on_promise(step.state, qs, Promise{B(2), std::nullopt, A(0)});
  auto ps = proposer_on_accept(step.state, qs, Accept{B(1), A(0)});
  EXPECT_EQ(ps.phase, ProposerPhase::kPhase2);
}

TEST(ProposerNack, RetryUsesHigherRound) {
  auto qs = make_majority(3, false);
  auto step = proposer_start(ProposerState::make(ProposerId{2}, 1, V("a")), qs, qs.universe());
  auto ps = proposer_on_nack(step.state, Nack{B(1, 2), B(5, 0), A(0)});
  EXPECT_EQ(ps.phase, ProposerPhase::kIdle);
  auto retry = proposer_retry(ps, qs, qs.universe());
  EXPECT_EQ(retry.state.ballot, B(6, 2));
  EXPECT_EQ(retry.out.size(), 3u);
}

TEST(Learner, FigureTwoAFinalState) {
  auto qs = make_majority(4, true);
  std::map<AcceptorId, AcceptorState> states{
      {A(0), {B(1), Accepted{B(1), V("a")}}},
      {A(1), {B(2, 1), Accepted{B(2, 1), V("a")}}},
      {A(2), {B(2, 1), Accepted{B(2, 1), V("a")}}},
      {A(3), {B(2, 1), Accepted{B(2, 1), V("a")}}},
  };
  auto d = learner_decided(states, qs);
  ASSERT_TRUE(d.decided());
  EXPECT_EQ(d.decided()->value, V("a"));
  EXPECT_FALSE(d.conflict());
}

TEST(Learner, NothingAccepted) {
  std::map<AcceptorId, AcceptorState> states{{A(0), {}}, {A(1), {}}};
  EXPECT_FALSE(learner_decided(states, make_majority(2, true)).decided());
}

TEST(Learner, SingleAcceptorIsNotAQuorum) {
  std::map<AcceptorId, AcceptorState> states{{A(0), {B(1), Accepted{B(1), V("a")}}}};
  EXPECT_FALSE(learner_decided(states, make_majority(4, true)).decided());
}

TEST(Learner, ReportsConflict) {
  auto qs = make_custom(2, {AcceptorSet{0}}, {AcceptorSet{0}, AcceptorSet{1}});
  std::map<AcceptorId, AcceptorState> states{
      {A(0), {B(1), Accepted{B(1), V("a")}}},
      {A(1), {B(2), Accepted{B(2), V("b")}}},
  };
  auto d = learner_decided(states, qs);
  EXPECT_EQ(d.quorums.size(), 2u);
  EXPECT_TRUE(d.conflict());
}

TEST(MessageJson, CanonicalFieldOrder) {
  Message m{Endpoint::proposer(0), Endpoint::acceptor(1), Propose{B(1), V("a")}};
  EXPECT_EQ(to_json(m).dump(), R"({"type":"propose","ballot":[1,0],"value":"a","src":"P0","dst":"A1"})");
}

TEST(MessageJson, RoundTripsEveryVariant) {
  std::vector<Message> msgs{
      {Endpoint::proposer(0), Endpoint::acceptor(1), Prepare{B(1)}},
      {Endpoint::acceptor(1), Endpoint::proposer(0), Promise{B(1), Accepted{B(0, 3), V("q")}, A(1)}},
      {Endpoint::acceptor(1), Endpoint::proposer(0), Promise{B(1), std::nullopt, A(1)}},
      {Endpoint::proposer(0), Endpoint::acceptor(1), Propose{B(7, 2), V("value")}},
      {Endpoint::acceptor(2), Endpoint::proposer(0), Accept{B(1), A(2)}},
      {Endpoint::acceptor(3), Endpoint::proposer(1), Nack{B(1), B(4, 0), A(3)}},
  };
  for (const auto& m : msgs) {
    auto text = to_json(m).dump();
    EXPECT_EQ(message_from_json(nlohmann::json::parse(text)), m) << text;
  }
}
