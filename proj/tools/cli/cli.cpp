#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "netoffload/appstats.hpp"
#include "netoffload/decision.hpp"
#include "netoffload/error.hpp"
#include "netoffload/partition.hpp"
#include "netoffload/simulator.hpp"

#ifndef NETOFFLOAD_VERSION
#define NETOFFLOAD_VERSION "0.0.0"
#endif

namespace netoffload::cli {

namespace {

using nlohmann::json;

// Runtime failures that are not input problems (I/O, internal errors).
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string real(double v) {
  auto s = fmt::format("{}", v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
  f << text;
  if (!f) throw RuntimeFailure(fmt::format("write failed for '{}'", path.string()));
}

// Writes to a file when a path is given, else to out.
void emit(const std::string& text, const std::string& path, std::ostream& out, CommandOutcome& outcome) {
  if (path.empty()) {
    out << text;
    return;
  }
  write_text(path, text);
  outcome.artifacts.emplace_back(path);
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError(fmt::format("invalid seed '{}'", s));
  return v;
}

// "1..30" or "1,4,9".
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const auto lo = parse_u64(std::string_view(spec).substr(0, dots));
    const auto hi = parse_u64(std::string_view(spec).substr(dots + 2));
    if (hi < lo) throw ValidationError(fmt::format("empty seed range '{}'", spec));
    if (hi - lo >= 100000) throw ValidationError("seed range too large");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  } else {
    std::string_view rest(spec);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      seeds.push_back(parse_u64(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  if (seeds.empty()) throw ValidationError("no seeds given");
  return seeds;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::string format = "csv";
  std::string strategy;
  std::size_t jobs = 0;
};

ScenarioConfig build_scenario(const SimulateArgs& a) {
  std::optional<StrategyKind> strategy;
  if (!a.strategy.empty()) {
    strategy = parse_strategy(a.strategy);
    if (!strategy) throw ValidationError(fmt::format("unknown strategy '{}'", a.strategy));
  }
  ScenarioConfig cfg;
  if (!a.preset.empty()) {
    auto p = preset_by_name(a.preset, strategy.value_or(StrategyKind::proactive));
    if (!p) throw ValidationError(fmt::format("unknown preset '{}'", a.preset));
    cfg = std::move(*p);
    if (!a.config.empty()) {
      std::ifstream in(a.config);
      if (!in) throw ValidationError(fmt::format("cannot open '{}'", a.config));
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError(fmt::format("{}: {}", a.config, e.what()));
      }
      apply_scenario_overrides(cfg, doc, std::filesystem::path(a.config).parent_path());
    }
  } else if (!a.config.empty()) {
    cfg = load_scenario_file(a.config);
  } else {
    throw ValidationError("simulate needs --config or --preset");
  }
  if (strategy) cfg.strategy.kind = *strategy;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

struct Aggregate {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

std::vector<Aggregate> aggregate(const std::vector<RunMetrics>& runs) {
  const std::vector<std::pair<std::string, double RunMetrics::*>> reals = {
      {"tau", &RunMetrics::tau}, {"phi_ms", &RunMetrics::phi_ms}, {"psi", &RunMetrics::psi}};
  const std::vector<std::pair<std::string, std::uint64_t RunMetrics::*>> counts = {
      {"total", &RunMetrics::total},
      {"executed", &RunMetrics::executed},
      {"executed_at_server", &RunMetrics::executed_at_server},
      {"forwarded", &RunMetrics::forwarded},
      {"dropped", &RunMetrics::dropped}};
  auto stats = [&](const std::string& name, auto get) {
    double sum = 0.0;
    for (const auto& r : runs) sum += get(r);
    const double n = static_cast<double>(runs.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (get(r) - mean) * (get(r) - mean);
    return Aggregate{name, mean, runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  };
  std::vector<Aggregate> out;
  for (const auto& [name, field] : reals) out.push_back(stats(name, [f = field](const RunMetrics& r) { return r.*f; }));
  for (const auto& [name, field] : counts)
    out.push_back(stats(name, [f = field](const RunMetrics& r) { return static_cast<double>(r.*f); }));
  return out;
}

std::vector<RunMetrics> run_batch(const ScenarioConfig& base, const std::vector<std::uint64_t>& seeds,
                                  std::size_t jobs) {
  std::vector<RunMetrics> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        ScenarioConfig cfg = base;
        cfg.seed = seeds[i];
        results[i] = run_scenario(cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

void simulate(const SimulateArgs& a, std::ostream& out, CommandOutcome& outcome) {
  if (a.format != "csv" && a.format != "json") throw ValidationError(fmt::format("unknown format '{}'", a.format));
  const auto format = a.format == "csv" ? MetricsFormat::csv : MetricsFormat::json;
  const ScenarioConfig cfg = build_scenario(a);

  if (a.seeds.empty()) {
    const auto metrics = run_scenario(cfg);
    if (a.out.empty()) {
      out << (format == MetricsFormat::csv ? summary_csv(metrics) : metrics_to_json(metrics).dump(2) + "\n");
      return;
    }
    outcome.artifacts = export_metrics(metrics, format, a.out);
    out << summary_csv(metrics);
    return;
  }

  const auto seeds = parse_seeds(a.seeds);
  const auto runs = run_batch(cfg, seeds, a.jobs);
  const auto agg = aggregate(runs);

  std::string agg_csv = "metric,mean,std\n";
  for (const auto& m : agg) agg_csv += fmt::format("{},{},{}\n", m.name, real(m.mean), real(m.stddev));
  if (a.out.empty()) {
    out << agg_csv;
    return;
  }
  std::filesystem::path dir(a.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (format == MetricsFormat::csv) {
    std::string per_seed = "seed,tau,phi_ms,psi,total,executed,executed_at_server,forwarded,dropped\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i];
      per_seed += fmt::format("{},{},{},{},{},{},{},{},{}\n", seeds[i], real(r.tau), real(r.phi_ms), real(r.psi),
                              r.total, r.executed, r.executed_at_server, r.forwarded, r.dropped);
    }
    write_text(dir / "batch.csv", per_seed);
    write_text(dir / "aggregate.csv", agg_csv);
    outcome.artifacts = {dir / "batch.csv", dir / "aggregate.csv"};
  } else {
    json per_seed = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto summary = metrics_to_json(runs[i]).at("summary");
      summary["seed"] = seeds[i];
      per_seed.push_back(std::move(summary));
    }
    json aggregate_doc = json::object();
    for (const auto& m : agg) aggregate_doc[m.name] = {{"mean", m.mean}, {"std", m.stddev}};
    write_text(dir / "batch.json", json{{"runs", per_seed}, {"aggregate", aggregate_doc}}.dump(2) + "\n");
    outcome.artifacts = {dir / "batch.json"};
  }
  out << agg_csv;
}

// ---------------------------------------------------------------------------
// partition / decide

struct GraphArgs {
  std::string graph;
  std::string rules;
  std::string metric = "hops";
  double min_gain = 1e-12;
};

CallGraph load_tagged_graph(const GraphArgs& a) {
  auto graph = load_call_graph(a.graph);
  if (!a.rules.empty()) graph = apply_tag_rules(std::move(graph), load_tag_rules(a.rules));
  return graph;
}

GirvanNewmanOptions gn_options(const GraphArgs& a) {
  GirvanNewmanOptions o;
  if (a.metric == "hops")
    o.metric = PathMetric::hops;
  else if (a.metric == "inverse-weight")
    o.metric = PathMetric::inverse_weight;
  else
    throw ValidationError(fmt::format("unknown path metric '{}'", a.metric));
  return o;
}

LouvainOptions louvain_options(const GraphArgs& a) {
  if (!(a.min_gain >= 0.0)) throw ValidationError("min-gain must be >= 0");
  return {a.min_gain};
}

struct DecideArgs {
  GraphArgs graph;
  std::vector<double> rtt_ms;
  double bandwidth_bps = 0.0;
  double speedup = 1.0;
  std::string energy_model;
  std::string mode = "any";
  std::string out;
};

void decide(const DecideArgs& a, std::ostream& out, CommandOutcome& outcome) {
  LatencyWindow window;
  for (std::size_t i = 0; i < a.rtt_ms.size(); ++i) window.push(a.rtt_ms[i] / 1000.0, static_cast<double>(i));
  NetworkConditions cond;
  cond.rtt = window.estimate().value_or(0.0);
  cond.bandwidth = a.bandwidth_bps / 8.0;
  cond.cpu_speedup = a.speedup;
  cond.validate();
  const EnergyModel model = a.energy_model.empty() ? EnergyModel{} : load_energy_model(a.energy_model);
  SetValidity mode;
  if (a.mode == "any")
    mode = SetValidity::any;
  else if (a.mode == "all")
    mode = SetValidity::all;
  else
    throw ValidationError(fmt::format("unknown mode '{}'", a.mode));

  const auto graph = load_tagged_graph(a.graph);
  const auto sets = enumerate_partition_sets(graph, gn_options(a.graph), louvain_options(a.graph));
  const auto verdict = select_partition(sets.sets, graph, cond, model, mode);
  auto doc = verdict_to_json(graph, verdict);
  doc["n_opt"] = sets.n_opt;
  doc["rtt_estimate_ms"] = cond.rtt * 1000.0;
  emit(doc.dump(2) + "\n", a.out, out, outcome);
}

// ---------------------------------------------------------------------------
// appstats

struct AppstatsArgs {
  std::string corpus;
  int synth = 0;
  std::uint64_t seed = 1;
  std::string depth = "5";
  bool a_to_p = false;
  std::string out;
  std::string write_corpus;
};

SynthParams default_synth(int n_apps) {
  SynthParams p;
  p.n_apps = n_apps;
  p.pool = {{"com.google.android.gms.ads", 120, 0.6},   {"com.google.android.gms.maps", 80, 0.3},
            {"com.facebook.ads.internal", 90, 0.4},     {"com.squareup.okhttp3", 60, 0.5},
            {"com.squareup.retrofit2", 40, 0.4},        {"io.reactivex.internal", 150, 0.3},
            {"org.apache.commons.lang3", 70, 0.2},      {"com.unity3d.player.core", 200, 0.15}};
  return p;
}

std::vector<int> parse_depths(const std::string& spec) {
  std::vector<int> depths;
  for (const auto s : parse_seeds(spec)) {
    if (s < 1 || s > 64) throw ValidationError(fmt::format("depth {} outside 1..64", s));
    depths.push_back(static_cast<int>(s));
  }
  return depths;
}

void appstats(const AppstatsArgs& a, std::ostream& out, CommandOutcome& outcome) {
  Corpus corpus;
  if (!a.corpus.empty() && a.synth > 0) throw ValidationError("give either --corpus or --synth, not both");
  if (!a.corpus.empty())
    corpus = load_corpus_file(a.corpus);
  else if (a.synth > 0)
    corpus = synth_corpus(default_synth(a.synth), a.seed).corpus;
  else
    throw ValidationError("appstats needs --corpus or --synth");
  if (!a.write_corpus.empty()) {
    write_text(a.write_corpus, corpus_to_text(corpus));
    outcome.artifacts.emplace_back(a.write_corpus);
  }
  const ObfuscationFilter filter{a.a_to_p};
  const auto depths = parse_depths(a.depth);
  json doc;
  if (depths.size() == 1) {
    doc = report_to_json(overlap_report(corpus, depths.front(), filter));
  } else {
    doc = json{{"reports", json::array()}};
    for (const int d : depths) doc["reports"].push_back(report_to_json(overlap_report(corpus, d, filter)));
  }
  emit(doc.dump(2) + "\n", a.out, out, outcome);
}

}  // namespace

CommandOutcome dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and analysis tools for in-network function offloading", "netoffload"};
  app.set_version_flag("--version", std::string("netoffload ") + NETOFFLOAD_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a network scenario and export metrics");
  simulate_cmd->add_option("--config", sim.config, "Scenario JSON file");
  simulate_cmd->add_option("--preset", sim.preset, "Built-in scenario: fig3, overload-line, overload-grid");
  simulate_cmd->add_option("--seed", sim.seed, "RNG seed");
  simulate_cmd->add_option("--seeds", sim.seeds, "Batch seeds, e.g. 1..30 or 1,2,3");
  simulate_cmd->add_option("--out", sim.out, "Output directory");
  simulate_cmd->add_option("--format", sim.format, "csv or json")->capture_default_str();
  simulate_cmd->add_option("--strategy", sim.strategy, "Override: none, passive, proactive");
  simulate_cmd->add_option("--jobs", sim.jobs, "Parallel runs in batch mode (0: all cores)");

  GraphArgs part;
  std::string part_out;
  auto* partition_cmd = app.add_subcommand("partition", "Enumerate Girvan-Newman partition sets of a call graph");
  partition_cmd->add_option("--graph", part.graph, "Call-graph JSON")->required();
  partition_cmd->add_option("--rules", part.rules, "Tag-rule JSON");
  partition_cmd->add_option("--out", part_out, "Output JSON file (stdout if omitted)");
  partition_cmd->add_option("--metric", part.metric, "Betweenness path length: hops or inverse-weight")
      ->capture_default_str();
  partition_cmd->add_option("--min-gain", part.min_gain, "Louvain minimum modularity gain per move")
      ->capture_default_str();

  DecideArgs dec;
  auto* decide_cmd = app.add_subcommand("decide", "Pick the partition to offload under network conditions");
  decide_cmd->add_option("--graph", dec.graph.graph, "Call-graph JSON")->required();
  decide_cmd->add_option("--rules", dec.graph.rules, "Tag-rule JSON");
  decide_cmd->add_option("--rtt-ms", dec.rtt_ms, "Observed RTT in ms; repeat for a rolling window of 3")
      ->required()
      ->expected(1, -1);
  decide_cmd->add_option("--bandwidth-bps", dec.bandwidth_bps, "Link rate in bits per second")->required();
  decide_cmd->add_option("--speedup", dec.speedup, "Remote over local CPU speed")->required();
  decide_cmd->add_option("--energy-model", dec.energy_model, "Energy model JSON");
  decide_cmd->add_option("--mode", dec.mode, "Set validity: any or all")->capture_default_str();
  decide_cmd->add_option("--metric", dec.graph.metric, "Betweenness path length: hops or inverse-weight")
      ->capture_default_str();
  decide_cmd->add_option("--out", dec.out, "Output JSON file (stdout if omitted)");

  AppstatsArgs stats;
  auto* appstats_cmd = app.add_subcommand("appstats", "Class-overlap and storage statistics over an app corpus");
  appstats_cmd->add_option("--corpus", stats.corpus, "Corpus file (app_id TAB dex_bytes TAB pkg=count;...)");
  appstats_cmd->add_option("--synth", stats.synth, "Generate a synthetic corpus with this many apps");
  appstats_cmd->add_option("--seed", stats.seed, "Seed for --synth")->capture_default_str();
  appstats_cmd->add_option("--depth", stats.depth, "Package depth N, or a range such as 1..8")->capture_default_str();
  appstats_cmd->add_flag("--a-to-p", stats.a_to_p, "Only one-letter segments a..p count as obfuscated");
  appstats_cmd->add_option("--out", stats.out, "Report JSON file (stdout if omitted)");
  appstats_cmd->add_option("--write-corpus", stats.write_corpus, "Also write the analyzed corpus to this file");

  CommandOutcome outcome;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    outcome.exit_code = code == 0 ? kExitOk : kExitValidation;
    return outcome;
  }

  try {
    if (simulate_cmd->parsed()) {
      simulate(sim, out, outcome);
    } else if (partition_cmd->parsed()) {
      const auto graph = load_tagged_graph(part);
      const auto sets = enumerate_partition_sets(graph, gn_options(part), louvain_options(part));
      emit(enumeration_to_json(graph, sets).dump(2) + "\n", part_out, out, outcome);
    } else if (decide_cmd->parsed()) {
      decide(dec, out, outcome);
    } else if (appstats_cmd->parsed()) {
      appstats(stats, out, outcome);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return {kExitValidation, {}};
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return {kExitRuntime, {}};
  }
  return outcome;
}

}  // namespace netoffload::cli
