#include "fpaxos/quorum.h"

#include <algorithm>
#include <stdexcept>

namespace fpaxos {

namespace {

void require_index(std::uint32_t index) {
  if (index >= AcceptorSet::kCapacity) {
    throw std::invalid_argument("acceptor index " + std::to_string(index) + " exceeds capacity");
  }
}

std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

}  // namespace

AcceptorSet::AcceptorSet(std::initializer_list<std::uint32_t> members) {
  for (auto m : members) insert(AcceptorId{m});
}

AcceptorSet AcceptorSet::universe(std::size_t n) {
  if (n > kCapacity) throw std::invalid_argument("cluster larger than 64 acceptors");
  return from_bits(n == kCapacity ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
}

AcceptorSet AcceptorSet::from_ids(std::span<const AcceptorId> ids) {
  AcceptorSet s;
  for (auto id : ids) s.insert(id);
  return s;
}

bool AcceptorSet::contains(AcceptorId a) const {
  return a.index < kCapacity && ((bits_ >> a.index) & 1U) != 0;
}

void AcceptorSet::insert(AcceptorId a) {
  require_index(a.index);
  bits_ |= std::uint64_t{1} << a.index;
}

void AcceptorSet::erase(AcceptorId a) {
  if (a.index < kCapacity) bits_ &= ~(std::uint64_t{1} << a.index);
}

std::vector<AcceptorId> AcceptorSet::members() const {
  std::vector<AcceptorId> out;
  out.reserve(size());
  for (std::uint64_t rest = bits_; rest != 0; rest &= rest - 1) {
    out.push_back(AcceptorId{static_cast<std::uint32_t>(std::countr_zero(rest))});
  }
  return out;
}

std::string AcceptorSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for (auto a : members()) {
    if (!first) out += ",";
    first = false;
    out += "A" + std::to_string(a.index);
  }
  return out + "}";
}

std::string_view to_string(QuorumKind kind) {
  switch (kind) {
    case QuorumKind::kMajority: return "majority";
    case QuorumKind::kImprovedMajority: return "even-improved-majority";
    case QuorumKind::kSimple: return "simple";
    case QuorumKind::kGridPaxos: return "grid-paxos";
    case QuorumKind::kGridFPaxos: return "grid-fpaxos";
    case QuorumKind::kCustom: return "custom";
  }
  return "unknown";
}

QuorumKind quorum_kind_from_string(std::string_view name) {
  for (auto k : {QuorumKind::kMajority, QuorumKind::kImprovedMajority, QuorumKind::kSimple,
                 QuorumKind::kGridPaxos, QuorumKind::kGridFPaxos, QuorumKind::kCustom}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown quorum kind '" + std::string(name) + "'");
}

QuorumSystem make_majority(std::size_t n, bool improved) {
  if (n == 0) throw std::invalid_argument("majority quorums need n >= 1");
  if (n > AcceptorSet::kCapacity) throw std::invalid_argument("cluster larger than 64 acceptors");
  QuorumSystem qs;
  qs.kind_ = improved ? QuorumKind::kImprovedMajority : QuorumKind::kMajority;
  qs.n_ = n;
  qs.q1_size_ = n / 2 + 1;
  qs.q2_size_ = improved ? ceil_half(n) : n / 2 + 1;
  return qs;
}

QuorumSystem make_simple(std::size_t n, std::size_t q2_size) {
  if (n == 0 || n > AcceptorSet::kCapacity) throw std::invalid_argument("simple quorums need 1 <= n <= 64");
  if (q2_size < 1 || q2_size > n) {
    throw std::invalid_argument("simple quorums need 1 <= q2 <= n (got q2=" + std::to_string(q2_size) +
                                ", n=" + std::to_string(n) + ")");
  }
  QuorumSystem qs;
  qs.kind_ = QuorumKind::kSimple;
  qs.n_ = n;
  qs.q2_size_ = q2_size;
  qs.q1_size_ = n - q2_size + 1;
  return qs;
}

QuorumSystem make_grid(std::size_t rows, std::size_t cols, GridMode mode) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("grid needs rows >= 1 and cols >= 1");
  if (rows * cols > AcceptorSet::kCapacity) throw std::invalid_argument("grid larger than 64 acceptors");
  QuorumSystem qs;
  qs.kind_ = mode == GridMode::kPaxos ? QuorumKind::kGridPaxos : QuorumKind::kGridFPaxos;
  qs.n_ = rows * cols;
  qs.rows_ = rows;
  qs.cols_ = cols;
  return qs;
}

QuorumSystem make_custom(std::size_t n, std::vector<AcceptorSet> q1, std::vector<AcceptorSet> q2) {
  if (n == 0 || n > AcceptorSet::kCapacity) throw std::invalid_argument("custom quorums need 1 <= n <= 64");
  if (q1.empty() || q2.empty()) throw std::invalid_argument("custom quorum families must be non-empty");
  const auto universe = AcceptorSet::universe(n);
  for (const auto* family : {&q1, &q2}) {
    for (auto s : *family) {
      if (s.empty()) throw std::invalid_argument("custom quorum contains an empty set");
      if (!s.is_subset_of(universe)) throw std::invalid_argument("custom quorum member outside universe");
    }
  }
  std::sort(q1.begin(), q1.end());
  q1.erase(std::unique(q1.begin(), q1.end()), q1.end());
  std::sort(q2.begin(), q2.end());
  q2.erase(std::unique(q2.begin(), q2.end()), q2.end());
  QuorumSystem qs;
  qs.kind_ = QuorumKind::kCustom;
  qs.n_ = n;
  qs.q1_basis_ = std::move(q1);
  qs.q2_basis_ = std::move(q2);
  return qs;
}

bool QuorumSystem::is_threshold() const {
  return kind_ == QuorumKind::kMajority || kind_ == QuorumKind::kImprovedMajority || kind_ == QuorumKind::kSimple;
}

bool QuorumSystem::is_q1(AcceptorSet s) const { return check(Phase::kOne, s); }
bool QuorumSystem::is_q2(AcceptorSet s) const { return check(Phase::kTwo, s); }

bool QuorumSystem::check(Phase phase, AcceptorSet s) const {
  if (!s.is_subset_of(universe())) {
    throw std::invalid_argument("acceptor set " + s.to_string() + " outside universe of " + std::to_string(n_));
  }
  switch (kind_) {
    case QuorumKind::kMajority:
    case QuorumKind::kImprovedMajority:
    case QuorumKind::kSimple:
      return s.size() >= (phase == Phase::kOne ? q1_size_ : q2_size_);
    case QuorumKind::kGridFPaxos:
      return phase == Phase::kOne ? has_full_row(s) : has_full_col(s);
    case QuorumKind::kGridPaxos:
      return has_full_row(s) && has_full_col(s);
    case QuorumKind::kCustom: {
      const auto& basis = phase == Phase::kOne ? q1_basis_ : q2_basis_;
      return std::any_of(basis.begin(), basis.end(), [s](AcceptorSet q) { return q.is_subset_of(s); });
    }
  }
  return false;
}

bool QuorumSystem::has_full_row(AcceptorSet s) const {
  for (std::size_t r = 0; r < rows_; ++r) {
    if (grid_row(r).is_subset_of(s)) return true;
  }
  return false;
}

bool QuorumSystem::has_full_col(AcceptorSet s) const {
  for (std::size_t c = 0; c < cols_; ++c) {
    if (grid_col(c).is_subset_of(s)) return true;
  }
  return false;
}

AcceptorSet QuorumSystem::grid_row(std::size_t r) const {
  AcceptorSet s;
  for (std::size_t c = 0; c < cols_; ++c) s.insert(AcceptorId{static_cast<std::uint32_t>(r * cols_ + c)});
  return s;
}

AcceptorSet QuorumSystem::grid_col(std::size_t c) const {
  AcceptorSet s;
  for (std::size_t r = 0; r < rows_; ++r) s.insert(AcceptorId{static_cast<std::uint32_t>(r * cols_ + c)});
  return s;
}

std::pair<std::size_t, std::size_t> QuorumSystem::grid_cell(AcceptorId a) const {
  if (cols_ == 0) throw std::invalid_argument("not a grid quorum system");
  if (a.index >= n_) throw std::invalid_argument("acceptor outside grid");
  return {a.index / cols_, a.index % cols_};
}

std::size_t QuorumSystem::min_q1_size() const {
  switch (kind_) {
    case QuorumKind::kGridFPaxos: return cols_;
    case QuorumKind::kGridPaxos: return rows_ + cols_ - 1;
    case QuorumKind::kCustom: {
      std::size_t best = n_;
      for (auto q : q1_basis_) best = std::min(best, q.size());
      return best;
    }
    default: return q1_size_;
  }
}

std::size_t QuorumSystem::min_q2_size() const {
  switch (kind_) {
    case QuorumKind::kGridFPaxos: return rows_;
    case QuorumKind::kGridPaxos: return rows_ + cols_ - 1;
    case QuorumKind::kCustom: {
      std::size_t best = n_;
      for (auto q : q2_basis_) best = std::min(best, q.size());
      return best;
    }
    default: return q2_size_;
  }
}

std::string QuorumSystem::describe() const {
  std::string out(to_string(kind_));
  out += "(n=" + std::to_string(n_);
  if (kind_ == QuorumKind::kGridPaxos || kind_ == QuorumKind::kGridFPaxos) {
    out += ", rows=" + std::to_string(rows_) + ", cols=" + std::to_string(cols_);
  }
  out += ", |Q1|=" + std::to_string(min_q1_size()) + ", |Q2|=" + std::to_string(min_q2_size()) + ")";
  return out;
}

std::vector<AcceptorSet> minimal_quorums(const QuorumSystem& qs, Phase phase) {
  const std::size_t n = qs.n();
  if (n > kMinimalEnumerationLimit) {
    throw std::invalid_argument("minimal quorum enumeration limited to n <= " +
                                std::to_string(kMinimalEnumerationLimit));
  }
  std::vector<AcceptorSet> out;
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t bits = 1; bits < end; ++bits) {
    const auto s = AcceptorSet::from_bits(bits);
    if (!qs.is_quorum(phase, s)) continue;
    bool minimal = true;
    for (std::uint64_t rest = bits; rest != 0 && minimal; rest &= rest - 1) {
      const std::uint64_t without = bits & ~(rest & (~rest + 1));
      if (qs.is_quorum(phase, AcceptorSet::from_bits(without))) minimal = false;
    }
    if (minimal) out.push_back(s);
  }
  return out;
}

std::optional<AcceptorSet> select_quorum(const QuorumSystem& qs, Phase phase,
                                         std::span<const AcceptorId> preference) {
  const auto universe = qs.universe();
  AcceptorSet chosen;
  std::vector<AcceptorId> order;
  order.reserve(preference.size());
  for (auto a : preference) {
    if (!universe.contains(a)) throw std::invalid_argument("preference names acceptor outside universe");
    if (chosen.contains(a)) continue;
    chosen.insert(a);
    order.push_back(a);
    if (qs.is_quorum(phase, chosen)) break;
  }
  if (!qs.is_quorum(phase, chosen)) return std::nullopt;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto trial = chosen;
    trial.erase(*it);
    if (qs.is_quorum(phase, trial)) chosen = trial;
  }
  return chosen;
}

IntersectionResult validate_cross_intersection(const QuorumSystem& qs) {
  IntersectionResult result;
  const std::size_t n = qs.n();
  const auto universe = qs.universe();
  if (n <= kPowersetLimit) {
    result.method = "powerset";
    std::vector<AcceptorSet> q1s;
    std::vector<AcceptorSet> q2s;
    const std::uint64_t end = std::uint64_t{1} << n;
    for (std::uint64_t bits = 1; bits < end; ++bits) {
      const auto s = AcceptorSet::from_bits(bits);
      if (qs.is_q1(s)) q1s.push_back(s);
      if (qs.is_q2(s)) q2s.push_back(s);
    }
    for (auto a : q1s) {
      for (auto b : q2s) {
        if (!a.intersects(b)) {
          result.verdict = Verdict::kViolated;
          result.witness = std::pair{a, b};
          return result;
        }
      }
    }
    result.verdict = Verdict::kHolds;
    return result;
  }
  if (n <= kMinimalEnumerationLimit) {
    // Upward closure: some Q2 avoids q1 iff the complement of q1 is a Q2.
    result.method = "minimal-q1-complement";
    for (auto q1 : minimal_quorums(qs, Phase::kOne)) {
      const auto rest = universe - q1;
      if (qs.is_q2(rest)) {
        result.verdict = Verdict::kViolated;
        result.witness = std::pair{q1, rest};
        return result;
      }
    }
    result.verdict = Verdict::kHolds;
    return result;
  }
  result.method = "unverifiable at this size";
  result.verdict = Verdict::kUnverifiable;
  return result;
}

std::optional<FaultToleranceReport> failure_tolerance_exhaustive(const QuorumSystem& qs) {
  const std::size_t n = qs.n();
  if (n > kMinimalEnumerationLimit) return std::nullopt;
  // Per failure count: every set keeps Q1 / Q2 / both, some set keeps Q2 / both.
  std::vector<char> all_q1(n + 1, 1), all_q2(n + 1, 1), all_both(n + 1, 1);
  std::vector<char> some_q2(n + 1, 0), some_both(n + 1, 0);
  const auto universe = qs.universe();
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t failed = 0; failed < end; ++failed) {
    const auto dead = AcceptorSet::from_bits(failed);
    const auto alive = universe - dead;
    const std::size_t f = dead.size();
    const bool q1 = qs.is_q1(alive);
    const bool q2 = qs.is_q2(alive);
    if (!q1) all_q1[f] = 0;
    if (!q2) all_q2[f] = 0;
    if (!(q1 && q2)) all_both[f] = 0;
    if (q2) some_q2[f] = 1;
    if (q1 && q2) some_both[f] = 1;
  }
  auto largest_prefix = [n](const std::vector<char>& flags) {
    std::size_t f = 0;
    while (f + 1 <= n && flags[f + 1]) ++f;
    return f;
  };
  auto largest_any = [n](const std::vector<char>& flags) {
    std::size_t best = 0;
    for (std::size_t f = 0; f <= n; ++f) {
      if (flags[f]) best = f;
    }
    return best;
  };
  FaultToleranceReport r;
  r.phase1_guaranteed_f = largest_prefix(all_q1);
  r.phase2_guaranteed_f = largest_prefix(all_q2);
  r.guaranteed_f = largest_prefix(all_both);
  r.phase2_only_max_f = largest_any(some_q2);
  r.best_case_f = largest_any(some_both);
  r.min_blocking_f = r.guaranteed_f + 1;
  return r;
}

std::optional<FaultToleranceReport> failure_tolerance(const QuorumSystem& qs) {
  if (!qs.is_threshold()) return failure_tolerance_exhaustive(qs);
  const std::size_t n = qs.n();
  FaultToleranceReport r;
  r.phase1_guaranteed_f = n - qs.q1_threshold();
  r.phase2_guaranteed_f = n - qs.q2_threshold();
  r.guaranteed_f = std::min(r.phase1_guaranteed_f, r.phase2_guaranteed_f);
  r.phase2_only_max_f = r.phase2_guaranteed_f;
  r.best_case_f = r.guaranteed_f;
  r.min_blocking_f = r.guaranteed_f + 1;
  return r;
}

std::vector<AcceptorSet> acceptor_sets_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of acceptor sets");
  std::vector<AcceptorSet> out;
  for (const auto& set : j) {
    if (!set.is_array()) throw std::invalid_argument("expected an array of acceptor indices");
    AcceptorSet s;
    for (const auto& idx : set) {
      if (!idx.is_number_unsigned()) throw std::invalid_argument("acceptor index must be a non-negative integer");
      s.insert(AcceptorId{idx.get<std::uint32_t>()});
    }
    out.push_back(s);
  }
  return out;
}

namespace {

nlohmann::json sets_to_json(const std::vector<AcceptorSet>& sets) {
  auto arr = nlohmann::json::array();
  for (auto s : sets) {
    auto members = nlohmann::json::array();
    for (auto a : s.members()) members.push_back(a.index);
    arr.push_back(std::move(members));
  }
  return arr;
}

std::size_t required_size(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw std::invalid_argument(std::string("quorum system JSON needs non-negative integer '") + key + "'");
  }
  return j.at(key).get<std::size_t>();
}

}  // namespace

void to_json(nlohmann::json& j, const QuorumSystem& qs) {
  j = nlohmann::json::object();
  j["kind"] = std::string(to_string(qs.kind()));
  j["n"] = qs.n();
  switch (qs.kind()) {
    case QuorumKind::kSimple: j["q2_size"] = qs.q2_threshold(); break;
    case QuorumKind::kGridPaxos:
    case QuorumKind::kGridFPaxos:
      j["rows"] = qs.rows();
      j["cols"] = qs.cols();
      break;
    case QuorumKind::kCustom:
      j["q1"] = sets_to_json(qs.q1_basis());
      j["q2"] = sets_to_json(qs.q2_basis());
      break;
    default: break;
  }
}

QuorumSystem quorum_system_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw std::invalid_argument("quorum system JSON needs a string 'kind'");
  }
  const auto kind = quorum_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case QuorumKind::kMajority: return make_majority(required_size(j, "n"), false);
    case QuorumKind::kImprovedMajority: return make_majority(required_size(j, "n"), true);
    case QuorumKind::kSimple: return make_simple(required_size(j, "n"), required_size(j, "q2_size"));
    case QuorumKind::kGridPaxos:
    case QuorumKind::kGridFPaxos: {
      const auto rows = required_size(j, "rows");
      const auto cols = required_size(j, "cols");
      if (j.contains("n") && required_size(j, "n") != rows * cols) {
        throw std::invalid_argument("grid quorum needs rows * cols == n");
      }
      return make_grid(rows, cols, kind == QuorumKind::kGridPaxos ? GridMode::kPaxos : GridMode::kFPaxos);
    }
    case QuorumKind::kCustom:
      return make_custom(required_size(j, "n"), acceptor_sets_from_json(j.at("q1")),
                         acceptor_sets_from_json(j.at("q2")));
  }
  throw std::invalid_argument("unhandled quorum kind");
}

nlohmann::json to_json(const FaultToleranceReport& r) {
  return {{"guaranteed_f", r.guaranteed_f},
          {"phase1_guaranteed_f", r.phase1_guaranteed_f},
          {"phase2_guaranteed_f", r.phase2_guaranteed_f},
          {"phase2_only_max_f", r.phase2_only_max_f},
          {"best_case_f", r.best_case_f},
          {"min_blocking_f", r.min_blocking_f}};
}

}  // namespace fpaxos
