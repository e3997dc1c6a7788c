#include "fpaxos/cli.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fpaxos/checker.h"
#include "fpaxos/quorum.h"
#include "fpaxos/sim.h"
#include "json.hpp"

namespace fpaxos::cli {

namespace {

using nlohmann::ordered_json;

// Reads a flat JSON object whose keys are the long flag names of the
// subcommand being run. Arrays repeat an option.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::vector<std::string> parents) : parents_(std::move(parents)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) throw CLI::ConversionError("config key '" + key + "' must not be an object");
      CLI::ConfigItem item;
      item.parents = parents_;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(e.is_structured() ? e.dump() : scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  std::vector<std::string> parents_;
};

// Subcommand path named by the leading arguments, used to scope config keys.
std::vector<std::string> subcommand_path(const std::vector<std::string>& args) {
  if (args.size() >= 2 && args[0] == "quorum") return {args[0], args[1]};
  if (!args.empty()) return {args[0]};
  return {};
}

struct QuorumOpts {
  std::string kind = "majority";
  std::size_t n = 3;
  std::optional<std::size_t> q2;
  bool improved = false;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string mode = "fpaxos";
  std::vector<std::string> custom;

  void add(CLI::App& app) {
    app.add_option("--kind", kind, "majority | simple | grid | custom")
        ->check(CLI::IsMember({"majority", "simple", "grid", "custom"}));
    app.add_option("--n", n, "number of acceptors");
    app.add_option("--q2", q2, "phase-2 quorum size (simple)");
    app.add_flag("--improved", improved, "even-n majority with |Q2| = n/2");
    app.add_option("--rows", rows, "grid rows");
    app.add_option("--cols", cols, "grid columns");
    app.add_option("--mode", mode, "grid mode: paxos | fpaxos")->check(CLI::IsMember({"paxos", "fpaxos"}));
    app.add_option("--custom", custom, "explicit families, e.g. q1='[[0]]' q2='[[1]]'")->expected(2);
  }

  QuorumSystem build(std::size_t n_override = 0, std::optional<std::size_t> q2_override = std::nullopt) const {
    const std::size_t size = n_override ? n_override : n;
    const auto q2_size = q2_override ? q2_override : q2;
    if (!custom.empty() || kind == "custom") return build_custom(size);
    if (kind == "majority") return make_majority(size, improved);
    if (kind == "simple") {
      if (!q2_size) throw std::invalid_argument("--kind simple needs --q2");
      return make_simple(size, *q2_size);
    }
    if (kind == "grid") {
      if (rows == 0 || cols == 0) throw std::invalid_argument("--kind grid needs --rows and --cols");
      return make_grid(rows, cols, mode == "paxos" ? GridMode::kPaxos : GridMode::kFPaxos);
    }
    throw std::invalid_argument("unknown quorum kind '" + kind + "'");
  }

 private:
  QuorumSystem build_custom(std::size_t size) const {
    std::optional<std::vector<AcceptorSet>> q1s;
    std::optional<std::vector<AcceptorSet>> q2s;
    for (const auto& arg : custom) {
      const auto eq = arg.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--custom expects q1=<json> q2=<json>, got '" + arg + "'");
      const auto key = arg.substr(0, eq);
      nlohmann::json sets;
      try {
        sets = nlohmann::json::parse(arg.substr(eq + 1));
      } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument("--custom " + key + " is not valid JSON");
      }
      if (key == "q1") {
        q1s = acceptor_sets_from_json(sets);
      } else if (key == "q2") {
        q2s = acceptor_sets_from_json(sets);
      } else {
        throw std::invalid_argument("--custom expects q1= and q2=, got '" + key + "'");
      }
    }
    if (!q1s || !q2s) throw std::invalid_argument("--custom needs both q1= and q2=");
    return make_custom(size, *q1s, *q2s);
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

// --- quorum analyze ---------------------------------------------------------

int cmd_quorum_analyze(const QuorumOpts& q, std::ostream& out) {
  const auto qs = q.build();
  const auto inter = validate_cross_intersection(qs);
  const auto ft = failure_tolerance(qs);

  nlohmann::json system;
  to_json(system, qs);
  ordered_json j;
  j["quorum"] = system;
  j["n"] = qs.n();
  j["q1"] = qs.min_q1_size();
  j["q2"] = qs.min_q2_size();
  j["intersects"] = inter.holds();
  j["intersection_method"] = inter.method;
  if (inter.witness) {
    j["witness"] = ordered_json{{"q1", inter.witness->first.to_string()}, {"q2", inter.witness->second.to_string()}};
  }
  if (ft) {
    j["fault_tolerance"] = to_json(*ft);
  } else {
    j["fault_tolerance"] = nullptr;
  }

  auto row = [&out](const std::string& k, const std::string& v) { out << std::left << std::setw(22) << k << v << '\n'; };
  row("system", qs.describe());
  row("n", std::to_string(qs.n()));
  row("q1", std::to_string(qs.min_q1_size()));
  row("q2", std::to_string(qs.min_q2_size()));
  row("intersects", inter.holds() ? "yes" : "no");
  if (ft) {
    row("guaranteed_f", std::to_string(ft->guaranteed_f));
    row("phase1_guaranteed_f", std::to_string(ft->phase1_guaranteed_f));
    row("phase2_guaranteed_f", std::to_string(ft->phase2_guaranteed_f));
    row("phase2_only_max_f", std::to_string(ft->phase2_only_max_f));
    row("min_blocking_f", std::to_string(ft->min_blocking_f));
    row("best_case_f", std::to_string(ft->best_case_f));
  }
  out << j.dump() << '\n';
  return inter.holds() ? kOk : kViolation;
}

// --- check ------------------------------------------------------------------

struct CheckOpts {
  std::uint32_t ballots = 2;
  std::uint32_t values = 2;
  std::uint32_t proposers = 2;
  std::uint32_t amnesia = 0;
  bool symmetry = false;
  std::uint64_t max_states = 5'000'000;
  std::string counterexample = "counterexample.jsonl";
  std::string result;
};

int cmd_check(const QuorumOpts& q, const CheckOpts& o, std::ostream& out) {
  checker::CheckConfig cfg;
  cfg.quorums = q.build();
  cfg.ballots = o.ballots;
  cfg.values = o.values;
  cfg.proposers = o.proposers;
  cfg.amnesia = o.amnesia;
  cfg.symmetry = o.symmetry;
  cfg.max_states = o.max_states;
  const auto r = checker::explore(cfg);

  for (const auto& cx : r.violations) {
    // Confirm through the core functions before reporting.
    const auto rs = checker::replay(cfg, cx.path);
    if (cx.property == checker::Property::kAgreement && !rs.conflicting()) {
      throw checker::ReplayDivergence("agreement counterexample does not replay to conflicting decisions");
    }
  }

  out << "system            " << cfg.quorums.describe() << '\n';
  out << "states explored   " << r.states << '\n';
  out << "transitions       " << r.transitions << '\n';
  out << "depth             " << r.depth << '\n';
  out << "complete          " << (r.complete ? "yes" : "no (state budget reached)") << '\n';
  if (r.safe()) {
    out << "result            no violation\n";
  } else {
    for (const auto& cx : r.violations) {
      out << "violation         " << checker::to_string(cx.property) << " in " << cx.path.size() << " actions: " << cx.detail
          << '\n';
    }
    // The agreement trace when there is one, else the shallowest.
    const auto* cx = r.find(checker::Property::kAgreement);
    if (!cx) cx = &r.violations.front();
    write_file(o.counterexample, checker::counterexample_jsonl(cfg, *cx));
    out << "counterexample    " << o.counterexample << '\n';
  }
  if (!o.result.empty()) {
    ordered_json j;
    j["config"] = checker::to_json(cfg);
    j["result"] = checker::to_json(r);
    write_file(o.result, j.dump(2) + '\n');
  }
  return r.safe() ? kOk : kViolation;
}

// --- simulate / sweep -------------------------------------------------------

struct SimOpts {
  std::uint64_t seed = 1;
  std::string latency = "fixed";
  double latency_ms = 10;
  double min_ms = 5;
  double max_ms = 25;
  std::optional<double> client_latency_ms;
  double loss = 0;
  double duplicate = 0;
  std::vector<std::string> crash;
  std::vector<std::string> restore;
  std::vector<std::string> elect;
  std::vector<std::string> partition;
  double duration_ms = 120'000;
  double warmup_ms = 10'000;
  double cooldown_ms = 10'000;
  std::size_t window = 10;
  std::size_t request_size = 64;
  std::string strategy = "fixed-first";
  bool send_to_all = false;

  void add(CLI::App& app) {
    app.add_option("--seed", seed, "RNG seed")->envname("FPAXOS_SEED");
    app.add_option("--latency", latency, "fixed | uniform | heterogeneous")
        ->check(CLI::IsMember({"fixed", "uniform", "heterogeneous"}));
    app.add_option("--latency-ms", latency_ms, "one-way delay for the fixed model");
    app.add_option("--min-ms", min_ms, "lower delay bound for uniform and heterogeneous");
    app.add_option("--max-ms", max_ms, "upper delay bound for uniform and heterogeneous");
    app.add_option("--client-latency-ms", client_latency_ms, "one-way client delay");
    app.add_option("--loss", loss, "message loss probability")->check(CLI::Range(0.0, 1.0));
    app.add_option("--duplicate", duplicate, "message duplication probability")->check(CLI::Range(0.0, 1.0));
    app.add_option("--crash", crash, "t=<ms>,r=<replica>[,lose=1]");
    app.add_option("--restore", restore, "t=<ms>,r=<replica>");
    app.add_option("--elect", elect, "t=<ms>,r=<replica>");
    app.add_option("--partition", partition, "t=<ms>,groups=0.1|2.3 (no groups heals)");
    app.add_option("--duration-ms", duration_ms, "virtual run length");
    app.add_option("--warmup-ms", warmup_ms, "discarded at the start");
    app.add_option("--cooldown-ms", cooldown_ms, "discarded at the end");
    app.add_option("--window", window, "outstanding client requests");
    app.add_option("--request-size", request_size, "request bytes, for goodput");
    app.add_option("--strategy", strategy, "fixed-first | rotating | random | fastest");
    app.add_flag("--send-to-all", send_to_all, "send phase 2 to every acceptor");
  }

  sim::SimConfig build(QuorumSystem qs) const {
    auto us = [](double ms) { return static_cast<sim::TimeUs>(std::llround(ms * 1000.0)); };
    sim::SimConfig cfg;
    cfg.quorums = std::move(qs);
    cfg.seed = seed;
    cfg.latency.kind = sim::latency_kind_from_string(latency);
    cfg.latency.fixed_us = us(latency_ms);
    cfg.latency.min_us = us(min_ms);
    cfg.latency.max_us = us(max_ms);
    if (client_latency_ms) cfg.client_latency_us = us(*client_latency_ms);
    cfg.loss = loss;
    cfg.duplicate = duplicate;
    for (const auto& c : crash) cfg.crashes.push_back(sim::parse_crash(c));
    for (const auto& r : restore) cfg.restores.push_back(sim::parse_restore(r));
    for (const auto& e : elect) cfg.elections.push_back(sim::parse_elect(e));
    for (const auto& p : partition) cfg.partitions.push_back(sim::parse_partition(p));
    cfg.duration_us = us(duration_ms);
    cfg.warmup_us = us(warmup_ms);
    cfg.cooldown_us = us(cooldown_ms);
    cfg.client_window = window;
    cfg.request_size = request_size;
    cfg.strategy = multi::target_strategy_from_string(strategy);
    cfg.send_to_all = send_to_all;
    cfg.validate();
    return cfg;
  }
};

sim::TimeUs last_scheduled_event(const sim::SimConfig& cfg) {
  sim::TimeUs t = 0;
  for (const auto& c : cfg.crashes) t = std::max(t, c.at);
  for (const auto& r : cfg.restores) t = std::max(t, r.at);
  for (const auto& e : cfg.elections) t = std::max(t, e.at);
  for (const auto& p : cfg.partitions) t = std::max(t, p.at);
  return t;
}

int cmd_scenario(const std::string& name, const QuorumOpts& q, bool quorum_given, const std::string& trace_path,
                 std::ostream& out) {
  const auto r = sim::scripted_scenario(name, quorum_given ? std::optional<QuorumSystem>(q.build()) : std::nullopt);
  std::ostringstream trace;
  for (const auto& line : r.trace) trace << line << '\n';
  ordered_json summary;
  summary["scenario"] = r.name;
  summary["outcome"] = r.outcome;
  summary["ok"] = r.outcome_ok;
  if (trace_path.empty()) {
    out << trace.str();
  } else {
    write_file(trace_path, trace.str());
    out << summary.dump() << '\n';
  }
  return r.outcome_ok ? kOk : kViolation;
}

int cmd_simulate(const sim::SimConfig& cfg, const std::string& trace_path, const std::string& metrics_path,
                 std::ostream& out) {
  std::ostringstream trace;
  const auto m = sim::run(cfg, trace_path.empty() ? nullptr : &trace);
  auto j = sim::metrics_to_json(cfg, m);
  const auto last = last_scheduled_event(cfg);
  if (last > 0) {
    ordered_json after;
    after["t_ms"] = static_cast<double>(last) / 1000.0;
    after["decisions"] = m.decisions_between(last, cfg.duration_us);
    after["completions"] = m.completions_between(last, cfg.duration_us);
    j["after_last_event"] = std::move(after);
  }
  if (!trace_path.empty()) write_file(trace_path, trace.str());
  if (metrics_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_file(metrics_path, j.dump(2) + '\n');
    out << sim::csv_header() << '\n' << sim::csv_row(cfg, m) << '\n';
  }
  return m.violation ? kViolation : kOk;
}

struct SweepOpts {
  std::vector<std::size_t> ns;
  std::vector<std::size_t> q2s;
  std::size_t seeds = 1;
  std::size_t threads = 0;
  std::string format = "csv";
  std::string out;
};

int cmd_sweep(const QuorumOpts& q, const SimOpts& s, const SweepOpts& w, std::ostream& out) {
  const auto ns = w.ns.empty() ? std::vector<std::size_t>{q.n} : w.ns;
  std::vector<std::optional<std::size_t>> q2s;
  for (auto v : w.q2s) q2s.emplace_back(v);
  if (q2s.empty()) q2s.push_back(q.q2);

  // Build and validate every variation before running any of them.
  std::vector<sim::SimConfig> configs;
  for (auto n : ns) {
    for (const auto& q2 : q2s) {
      const auto qs = q.build(n, q2);
      const auto inter = validate_cross_intersection(qs);
      if (!inter.holds()) throw std::invalid_argument(qs.describe() + ": phase-1 and phase-2 quorums do not intersect");
      for (std::size_t i = 0; i < w.seeds; ++i) {
        SimOpts per_seed = s;
        per_seed.seed = s.seed + i;
        configs.push_back(per_seed.build(qs));
      }
    }
  }

  std::vector<sim::RunMetrics> results(configs.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(configs.size(), w.threads ? w.threads : std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) results[i] = sim::run(configs[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::ostringstream text;
  bool violated = false;
  if (w.format == "json") {
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < configs.size(); ++i) arr.push_back(sim::metrics_to_json(configs[i], results[i]));
    text << arr.dump(2) << '\n';
  } else {
    text << sim::csv_header() << '\n';
    for (std::size_t i = 0; i < configs.size(); ++i) text << sim::csv_row(configs[i], results[i]) << '\n';
  }
  for (const auto& r : results) violated = violated || r.violation.has_value();
  if (w.out.empty()) {
    out << text.str();
  } else {
    write_file(w.out, text.str());
    out << "wrote " << configs.size() << " runs to " << w.out << '\n';
  }
  return violated ? kViolation : kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FPaxos toolkit: quorum analysis, model checking and simulation", "fpaxos"};
  app.require_subcommand(1);
  // Subcommands hand --config up to the top level, which applies it to
  // the subcommand being run. Flags on the command line take precedence.
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>(subcommand_path(args)));
  app.set_config("--config", "", "JSON file whose keys mirror the long flags of the subcommand");

  QuorumOpts quorum;
  CheckOpts check;
  SimOpts sim_opts;
  SweepOpts sweep;
  std::string scenario;
  std::string trace_path;
  std::string metrics_path;

  auto* quorum_cmd = app.add_subcommand("quorum", "quorum system tools");
  quorum_cmd->require_subcommand(1);
  auto* analyze = quorum_cmd->add_subcommand("analyze", "sizes, intersection and fault tolerance");
  quorum.add(*analyze);

  auto* check_cmd = app.add_subcommand("check", "exhaustive safety check of single-decree executions");
  quorum.add(*check_cmd);
  check_cmd->add_option("--ballots", check.ballots, "ballot bound");
  check_cmd->add_option("--values", check.values, "number of distinct values");
  check_cmd->add_option("--proposers", check.proposers, "proposers owning the ballots");
  check_cmd->add_option("--amnesia", check.amnesia, "times an acceptor may lose its state");
  check_cmd->add_flag("--symmetry", check.symmetry, "reduce by value and acceptor symmetry");
  check_cmd->add_option("--max-states", check.max_states, "state budget");
  check_cmd->add_option("--counterexample", check.counterexample, "where to write a counterexample trace");
  check_cmd->add_option("--result", check.result, "write the result as JSON");

  auto* sim_cmd = app.add_subcommand("simulate", "run one simulated cluster or a scripted scenario");
  quorum.add(*sim_cmd);
  sim_opts.add(*sim_cmd);
  sim_cmd->add_option("--scenario", scenario, "fig2a | fig2b")->check(CLI::IsMember({"fig2a", "fig2b"}));
  sim_cmd->add_option("--trace", trace_path, "write a JSON-lines trace");
  sim_cmd->add_option("--metrics", metrics_path, "write metrics JSON here instead of stdout");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of simulations");
  quorum.add(*sweep_cmd);
  sim_opts.add(*sweep_cmd);
  sweep_cmd->add_option("--ns", sweep.ns, "cluster sizes to sweep");
  sweep_cmd->add_option("--q2s", sweep.q2s, "phase-2 quorum sizes to sweep (simple)");
  sweep_cmd->add_option("--seeds", sweep.seeds, "seeds per variation, counting up from --seed");
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads (0 = hardware)");
  sweep_cmd->add_option("--format", sweep.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  sweep_cmd->add_option("--out", sweep.out, "output file (stdout when empty)");

  std::vector<std::string> argv_store{"fpaxos"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (analyze->parsed()) return cmd_quorum_analyze(quorum, out);
    if (check_cmd->parsed()) return cmd_check(quorum, check, out);
    if (sim_cmd->parsed()) {
      if (!scenario.empty()) {
        const bool given = sim_cmd->count("--kind") || sim_cmd->count("--custom");
        return cmd_scenario(scenario, quorum, given, trace_path, out);
      }
      return cmd_simulate(sim_opts.build(quorum.build()), trace_path, metrics_path, out);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(quorum, sim_opts, sweep, out);
  } catch (const checker::ReplayDivergence& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace fpaxos::cli
