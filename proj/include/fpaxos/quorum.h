#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fpaxos {

struct AcceptorId {
  std::uint32_t index = 0;

  friend auto operator<=>(const AcceptorId&, const AcceptorId&) = default;
};

// Fixed-capacity bitset of acceptors. Index i is bit i.
class AcceptorSet {
 public:
  static constexpr std::size_t kCapacity = 64;

  constexpr AcceptorSet() = default;
  AcceptorSet(std::initializer_list<std::uint32_t> members);

  static constexpr AcceptorSet from_bits(std::uint64_t bits) {
    AcceptorSet s;
    s.bits_ = bits;
    return s;
  }
  // {0, ..., n-1}
  static AcceptorSet universe(std::size_t n);
  static AcceptorSet from_ids(std::span<const AcceptorId> ids);

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  bool contains(AcceptorId a) const;
  void insert(AcceptorId a);
  void erase(AcceptorId a);

  constexpr bool is_subset_of(AcceptorSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(AcceptorSet other) const { return (bits_ & other.bits_) != 0; }

  // Highest member index + 1, or 0 when empty.
  std::size_t span_end() const { return bits_ == 0 ? 0 : 64 - static_cast<std::size_t>(std::countl_zero(bits_)); }

  std::vector<AcceptorId> members() const;
  std::string to_string() const;

  friend constexpr AcceptorSet operator|(AcceptorSet a, AcceptorSet b) { return from_bits(a.bits_ | b.bits_); }
  friend constexpr AcceptorSet operator&(AcceptorSet a, AcceptorSet b) { return from_bits(a.bits_ & b.bits_); }
  friend constexpr AcceptorSet operator-(AcceptorSet a, AcceptorSet b) { return from_bits(a.bits_ & ~b.bits_); }
  friend constexpr bool operator==(AcceptorSet, AcceptorSet) = default;
  friend constexpr auto operator<=>(AcceptorSet a, AcceptorSet b) { return a.bits_ <=> b.bits_; }

 private:
  std::uint64_t bits_ = 0;
};

enum class QuorumKind {
  kMajority,
  kImprovedMajority,
  kSimple,
  kGridPaxos,
  kGridFPaxos,
  kCustom,
};

enum class GridMode { kPaxos, kFPaxos };

enum class Phase { kOne, kTwo };

std::string_view to_string(QuorumKind kind);
QuorumKind quorum_kind_from_string(std::string_view name);

// Decides which acceptor sets are valid phase-1 (Q1) and phase-2 (Q2)
// quorums. All predicates are upward closed: a superset of a quorum is a
// quorum. Immutable once built.
class QuorumSystem {
 public:
  QuorumKind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  AcceptorSet universe() const { return AcceptorSet::universe(n_); }

  // Threshold kinds only.
  std::size_t q1_threshold() const { return q1_size_; }
  std::size_t q2_threshold() const { return q2_size_; }
  // Grid kinds only.
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  // Custom kind only: the generating families.
  const std::vector<AcceptorSet>& q1_basis() const { return q1_basis_; }
  const std::vector<AcceptorSet>& q2_basis() const { return q2_basis_; }

  bool is_threshold() const;
  // True when the predicates are invariant under every permutation of
  // acceptor labels.
  bool is_symmetric() const { return is_threshold(); }

  // Throws std::invalid_argument when s has a member outside [0, n).
  bool is_q1(AcceptorSet s) const;
  bool is_q2(AcceptorSet s) const;
  bool is_quorum(Phase phase, AcceptorSet s) const { return phase == Phase::kOne ? is_q1(s) : is_q2(s); }

  // Size of the smallest Q1 / Q2.
  std::size_t min_q1_size() const;
  std::size_t min_q2_size() const;

  // Cell of acceptor a in a grid system: {row, col}, row-major.
  std::pair<std::size_t, std::size_t> grid_cell(AcceptorId a) const;
  AcceptorSet grid_row(std::size_t r) const;
  AcceptorSet grid_col(std::size_t c) const;

  std::string describe() const;

  friend bool operator==(const QuorumSystem&, const QuorumSystem&) = default;

  friend QuorumSystem make_majority(std::size_t n, bool improved);
  friend QuorumSystem make_simple(std::size_t n, std::size_t q2_size);
  friend QuorumSystem make_grid(std::size_t rows, std::size_t cols, GridMode mode);
  friend QuorumSystem make_custom(std::size_t n, std::vector<AcceptorSet> q1, std::vector<AcceptorSet> q2);

 private:
  QuorumSystem() = default;
  bool check(Phase phase, AcceptorSet s) const;
  bool has_full_row(AcceptorSet s) const;
  bool has_full_col(AcceptorSet s) const;

  QuorumKind kind_ = QuorumKind::kMajority;
  std::size_t n_ = 0;
  std::size_t q1_size_ = 0;
  std::size_t q2_size_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<AcceptorSet> q1_basis_;
  std::vector<AcceptorSet> q2_basis_;
};

// Classic: |Q1| = |Q2| = floor(n/2)+1. Improved: |Q2| = ceil(n/2), which
// only differs from classic for even n.
QuorumSystem make_majority(std::size_t n, bool improved);
// |Q2| = q2_size, |Q1| = n - q2_size + 1.
QuorumSystem make_simple(std::size_t n, std::size_t q2_size);
// Acceptor i sits at (i / cols, i % cols). FPaxos mode: Q1 = a full row,
// Q2 = a full column. Paxos mode: both phases need a full row and a full
// column.
QuorumSystem make_grid(std::size_t rows, std::size_t cols, GridMode mode);
// Q1 (resp. Q2) = every superset of some member of q1 (resp. q2).
QuorumSystem make_custom(std::size_t n, std::vector<AcceptorSet> q1, std::vector<AcceptorSet> q2);

// Minimal quorums of one phase, ascending by bitmask. Exhaustive over the
// powerset; throws std::invalid_argument past kMinimalEnumerationLimit.
std::vector<AcceptorSet> minimal_quorums(const QuorumSystem& qs, Phase phase);

// Picks a minimal quorum using acceptors from `preference`, favouring
// earlier entries. Returns nullopt when no quorum exists among them.
std::optional<AcceptorSet> select_quorum(const QuorumSystem& qs, Phase phase,
                                         std::span<const AcceptorId> preference);

inline constexpr std::size_t kPowersetLimit = 12;
inline constexpr std::size_t kMinimalEnumerationLimit = 20;

enum class Verdict { kHolds, kViolated, kUnverifiable };

struct IntersectionResult {
  Verdict verdict = Verdict::kUnverifiable;
  // A disjoint (Q1, Q2) pair when violated.
  std::optional<std::pair<AcceptorSet, AcceptorSet>> witness;
  std::string method;

  bool holds() const { return verdict == Verdict::kHolds; }
};

// Exhaustively checks that every Q1 meets every Q2. Full pairwise powerset
// check for n <= 12, minimal-Q1 vs complement check for n <= 20, and an
// explicit unverifiable verdict beyond that.
IntersectionResult validate_cross_intersection(const QuorumSystem& qs);

struct FaultToleranceReport {
  // Largest f such that every failure set of size f leaves both a Q1 and a
  // Q2 among the survivors.
  std::size_t guaranteed_f = 0;
  // Same, per phase.
  std::size_t phase1_guaranteed_f = 0;
  std::size_t phase2_guaranteed_f = 0;
  // Largest f such that some failure set of size f leaves a Q2.
  std::size_t phase2_only_max_f = 0;
  // Largest f such that some failure set of size f leaves both a Q1 and a Q2.
  std::size_t best_case_f = 0;
  // Smallest failure count that can halt the system (guaranteed_f + 1).
  std::size_t min_blocking_f = 0;

  friend bool operator==(const FaultToleranceReport&, const FaultToleranceReport&) = default;
};

// Closed form for threshold kinds, exhaustive enumeration otherwise.
// nullopt when the system is too large to enumerate.
std::optional<FaultToleranceReport> failure_tolerance(const QuorumSystem& qs);
// Always enumerates failure sets; nullopt for n > kMinimalEnumerationLimit.
std::optional<FaultToleranceReport> failure_tolerance_exhaustive(const QuorumSystem& qs);

void to_json(nlohmann::json& j, const QuorumSystem& qs);
QuorumSystem quorum_system_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FaultToleranceReport& r);

std::vector<AcceptorSet> acceptor_sets_from_json(const nlohmann::json& j);

}  // namespace fpaxos
