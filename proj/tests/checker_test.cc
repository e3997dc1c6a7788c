#include "fpaxos/checker.h"

#include <gtest/gtest.h>

#include <sstream>

namespace fpaxos::checker {
namespace {

CheckConfig config(QuorumSystem qs, std::uint32_t ballots = 2, std::uint32_t values = 2) {
  CheckConfig cfg;
  cfg.quorums = std::move(qs);
  cfg.ballots = ballots;
  cfg.values = values;
  return cfg;
}

QuorumSystem disjoint() { return make_custom(2, {AcceptorSet{0}}, {AcceptorSet{1}}); }

TEST(Explore, ClassicMajorityIsSafe) {
  const auto r = explore(config(make_majority(3, false), 3));
  EXPECT_TRUE(r.safe());
  EXPECT_TRUE(r.complete);
  // Pinned so changes to the transition relation show up as drift.
  EXPECT_EQ(r.states, 185369u);
}

TEST(Explore, SmallStateCountsArePinned) {
  EXPECT_EQ(explore(config(make_majority(3, false))).states, 3921u);
  EXPECT_EQ(explore(config(make_majority(4, true))).states, 20609u);
  EXPECT_EQ(explore(config(make_grid(2, 2, GridMode::kFPaxos))).states, 39937u);
}

TEST(Explore, FlexibleSystemsAreSafe) {
  for (const auto& qs : {make_majority(4, true), make_simple(4, 2), make_simple(4, 1), make_grid(2, 2, GridMode::kFPaxos)}) {
    const auto r = explore(config(qs));
    EXPECT_TRUE(r.safe()) << qs.describe();
    EXPECT_TRUE(r.complete) << qs.describe();
  }
}

TEST(Explore, DisjointQuorumsBreakAgreement) {
  const auto cfg = config(disjoint());
  const auto r = explore(cfg);
  const auto* cx = r.find(Property::kAgreement);
  ASSERT_NE(cx, nullptr);
  EXPECT_LE(cx->path.size(), 10u);
  // Two prepares, one promise each, two proposals, one accept each.
  EXPECT_EQ(cx->path.size(), 8u);
  ASSERT_NE(r.find(Property::kProposal), nullptr);
  EXPECT_LE(r.find(Property::kProposal)->path.size(), cx->path.size());

  const auto rs = replay(cfg, cx->path);
  EXPECT_TRUE(rs.conflicting());
  ASSERT_EQ(rs.decisions.size(), 2u);
  EXPECT_NE(rs.decisions[0].value, rs.decisions[1].value);
}

TEST(Explore, IsDeterministic) {
  const auto cfg = config(disjoint());
  const auto a = explore(cfg);
  const auto b = explore(cfg);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.transitions, b.transitions);
  ASSERT_EQ(a.violations.size(), b.violations.size());
  EXPECT_EQ(counterexample_jsonl(cfg, a.violations[0]), counterexample_jsonl(cfg, b.violations[0]));
}

TEST(Explore, SymmetryKeepsVerdictsAndShrinksSpace) {
  auto cfg = config(make_majority(3, false), 3);
  const auto plain = explore(cfg);
  cfg.symmetry = true;
  const auto reduced = explore(cfg);
  EXPECT_TRUE(reduced.safe());
  EXPECT_LT(reduced.states, plain.states);

  auto bad = config(disjoint());
  bad.symmetry = true;
  const auto r = explore(bad);
  ASSERT_NE(r.find(Property::kAgreement), nullptr);
  EXPECT_TRUE(replay(bad, r.find(Property::kAgreement)->path).conflicting());
}

TEST(Explore, BudgetMarksResultIncomplete) {
  auto cfg = config(make_majority(3, false), 3);
  cfg.max_states = 1000;
  const auto r = explore(cfg);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.states, 1000u);
}

TEST(Explore, AmnesiaBreaksMajority) {
  auto cfg = config(make_majority(3, false));
  cfg.amnesia = 1;
  const auto r = explore(cfg);
  const auto* cx = r.find(Property::kAgreement);
  ASSERT_NE(cx, nullptr);
  EXPECT_TRUE(std::any_of(cx->path.begin(), cx->path.end(),
                          [](const Action& a) { return a.kind == ActionKind::kAmnesia; }));
  EXPECT_TRUE(replay(cfg, cx->path).conflicting());
}

TEST(Replay, EmptyPathIsInitialState) {
  const auto cfg = config(make_majority(3, false));
  const auto rs = replay(cfg, {});
  EXPECT_TRUE(rs.sent.empty());
  EXPECT_TRUE(rs.decisions.empty());
  for (const auto& [a, st] : rs.acceptors) EXPECT_EQ(st, AcceptorState{});
}

TEST(Replay, PrefixesOfCounterexampleStayConsistent) {
  const auto cfg = config(disjoint());
  const auto cx = *explore(cfg).find(Property::kAgreement);
  for (std::size_t k = 0; k < cx.path.size(); ++k) {
    const std::vector<Action> prefix(cx.path.begin(), cx.path.begin() + static_cast<std::ptrdiff_t>(k));
    EXPECT_FALSE(replay(cfg, prefix).conflicting()) << "prefix " << k;
  }
}

TEST(Replay, SafeRunDecidesOnceAndForcesValue) {
  const auto cfg = config(make_majority(3, false));
  const std::vector<Action> path{
      {ActionKind::kPhase1a, 0, 1, 0, {}},
      {ActionKind::kPhase1b, 0, 1, 0, {}},
      {ActionKind::kPhase1b, 1, 1, 0, {}},
      {ActionKind::kPhase2a, 0, 1, 0, AcceptorSet{0, 1}},
      {ActionKind::kPhase2b, 0, 1, 0, {}},
      {ActionKind::kPhase2b, 1, 1, 0, {}},
      {ActionKind::kPhase1a, 0, 2, 0, {}},
      {ActionKind::kPhase1b, 1, 2, 0, {}},
      {ActionKind::kPhase1b, 2, 2, 0, {}},
      // The promise from A1 carries (1,a), so b is not allowed.
      {ActionKind::kPhase2a, 0, 2, 0, AcceptorSet{1, 2}},
      {ActionKind::kPhase2b, 2, 2, 0, {}},
  };
  for (std::size_t k = 0; k <= path.size(); ++k) {
    const std::vector<Action> prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k));
    const auto rs = replay(cfg, prefix);
    EXPECT_FALSE(rs.conflicting());
    EXPECT_EQ(rs.decisions.empty(), k < 6) << "prefix " << k;
  }
  auto forced_b = path;
  forced_b[9].value = 1;
  EXPECT_THROW(replay(cfg, forced_b), ReplayDivergence);
}

TEST(Replay, RejectsActionsTheModelDisallows) {
  const auto cfg = config(make_majority(3, false));
  EXPECT_THROW(replay(cfg, {{ActionKind::kPhase1b, 0, 1, 0, {}}}), ReplayDivergence);
  EXPECT_THROW(replay(cfg, {{ActionKind::kPhase1a, 0, 1, 0, {}}, {ActionKind::kPhase1a, 0, 1, 0, {}}}), ReplayDivergence);
}

TEST(Sweep, VerdictMatchesIntersection) {
  const auto entries = quorum_safety_sweep(4);
  std::size_t unsafe = 0;
  for (const auto& e : entries) {
    EXPECT_TRUE(e.consistent()) << e.name;
    if (!e.intersects) ++unsafe;
  }
  EXPECT_GT(unsafe, 0u);
  auto find = [&entries](const std::string& name) {
    return *std::find_if(entries.begin(), entries.end(), [&name](const SweepEntry& e) { return e.name == name; });
  };
  EXPECT_TRUE(find("majority n=3").result.safe());
  EXPECT_TRUE(find("simple n=3 q2=3").result.safe());
  EXPECT_FALSE(find("any-1/any-1 n=3").result.safe());
  EXPECT_TRUE(find("improved-majority n=4").result.safe());
  EXPECT_TRUE(find("grid-fpaxos 2x2").result.safe());
}

TEST(Json, ConfigRoundTrip) {
  auto cfg = config(make_grid(2, 2, GridMode::kFPaxos), 3, 2);
  cfg.amnesia = 1;
  cfg.symmetry = true;
  const auto back = check_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(back.quorums.describe(), cfg.quorums.describe());
  EXPECT_EQ(back.ballots, 3u);
  EXPECT_EQ(back.amnesia, 1u);
  EXPECT_TRUE(back.symmetry);
  EXPECT_THROW(check_config_from_json(nlohmann::json{{"ballots", 0}}), std::invalid_argument);
}

TEST(Json, CounterexampleLines) {
  const auto cfg = config(disjoint());
  const auto cx = *explore(cfg).find(Property::kAgreement);
  std::istringstream in(counterexample_jsonl(cfg, cx));
  std::string line;
  std::size_t lines = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    last = nlohmann::json::parse(line);
    EXPECT_EQ(last.at("step").get<std::size_t>(), lines);
    ++lines;
  }
  EXPECT_EQ(lines, cx.path.size() + 1);
  EXPECT_EQ(last.at("event"), "violation");
  EXPECT_EQ(last.at("property"), "agreement");
}

}  // namespace
}  // namespace fpaxos::checker
