#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "pbnsteady/analysis.hpp"
#include "pbnsteady/error.hpp"
#include "pbnsteady/exact.hpp"
#include "pbnsteady/model.hpp"
#include "pbnsteady/parallel.hpp"
#include "pbnsteady/simulator.hpp"
#include "pbnsteady/two_state.hpp"

namespace pbn::cli {

namespace {

using Json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Emitter {
  std::ostream& out;
  bool pretty = false;

  void emit(const Json& record) {
    if (!pretty) {
      out << record.dump() << '\n';
      return;
    }
    print_pretty(record, "");
    out << '\n';
  }

 private:
  void print_pretty(const Json& value, const std::string& prefix) {
    for (const auto& [key, v] : value.items()) {
      const std::string name = prefix.empty() ? key : prefix + "." + key;
      if (v.is_object()) {
        print_pretty(v, name);
      } else if (v.is_string()) {
        out << std::left << std::setw(22) << name << ' ' << v.get<std::string>() << '\n';
      } else {
        out << std::left << std::setw(22) << name << ' ' << v.dump() << '\n';
      }
    }
  }
};

struct LoadedModel {
  std::optional<PbnModel> model;
  std::string path;
  std::string hash;
};

LoadedModel load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  LoadedModel loaded;
  loaded.model.emplace(parse_model(std::string_view(text)));
  loaded.path = path;
  loaded.hash = fnv1a_hex(text);
  return loaded;
}

NodeIndex resolve_node(const PbnModel& model, const std::string& text) {
  if (auto found = model.find_node(text)) return *found;
  if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
    const unsigned long long v = std::stoull(text);
    if (v < model.node_count()) return static_cast<NodeIndex>(v);
  }
  throw UsageError("unknown node '" + text + "'");
}

std::vector<NodeIndex> resolve_nodes(const PbnModel& model, const std::string& list) {
  std::vector<NodeIndex> nodes;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) nodes.push_back(resolve_node(model, item));
  }
  if (nodes.empty()) throw UsageError("empty node list");
  return nodes;
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("PBN_STEADY_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

struct EstimationFlags {
  double r = 1e-3;
  double s = 0.95;
  double epsilon = 1e-10;
  std::size_t k = 1;
  std::size_t m0 = 5;
  std::string n0 = "AUTO";
  std::string heuristic = "simple";
  std::size_t max_doublings = 30;
  std::size_t max_iterations = 1000;
  std::optional<std::uint64_t> seed;
};

void add_estimation_flags(CLI::App* app, EstimationFlags& f, bool require_r) {
  auto* r = app->add_option("--r", f.r, "precision of the estimate");
  if (require_r) r->required();
  app->add_option("--s", f.s, "confidence level")->capture_default_str();
  app->add_option("--epsilon", f.epsilon, "burn-in closeness to stationarity")->capture_default_str();
  app->add_option("--k", f.k, "subsampling lag")->capture_default_str();
  app->add_option("--m0", f.m0, "initial burn-in points")->capture_default_str();
  app->add_option("--n0", f.n0, "initial sample size or AUTO")->capture_default_str();
  app->add_option("--heuristic", f.heuristic, "simple|controlled|pitfall|none")->capture_default_str();
  app->add_option("--max-doublings", f.max_doublings, "bound on initial-sample doublings")
      ->capture_default_str();
  app->add_option("--max-iterations", f.max_iterations, "bound on estimator iterations")
      ->capture_default_str();
  app->add_option("--seed", f.seed, "random seed");
}

TwoStateParams to_params(const EstimationFlags& f) {
  TwoStateParams p;
  p.r = f.r;
  p.s = f.s;
  p.epsilon = f.epsilon;
  p.k = f.k;
  p.m0 = f.m0;
  p.max_doublings = f.max_doublings;
  p.max_iterations = f.max_iterations;
  const auto h = parse_heuristic(f.heuristic);
  if (!h) throw UsageError("unknown heuristic '" + f.heuristic + "'");
  p.heuristic = *h;
  if (f.n0 != "AUTO" && f.n0 != "auto") {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(f.n0, &used);
      if (used != f.n0.size()) throw std::invalid_argument("trailing characters");
      p.n0 = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw UsageError("--n0 must be a positive integer or AUTO");
    }
  }
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

std::uint64_t require_seed(const EstimationFlags& f) {
  if (!f.seed) throw UsageError("--seed is required");
  return *f.seed;
}

Json params_json(const TwoStateParams& p) {
  Json j;
  j["r"] = p.r;
  j["s"] = p.s;
  j["epsilon"] = p.epsilon;
  j["k"] = p.k;
  j["m0"] = p.m0;
  j["n0"] = p.n0 ? Json(*p.n0) : Json("AUTO");
  j["heuristic"] = std::string(to_string(p.heuristic));
  return j;
}

Json run_json(const TwoStateRun& run) {
  Json j;
  j["n0"] = run.n0;
  j["alpha_hat"] = run.alpha_hat;
  j["beta_hat"] = run.beta_hat;
  j["M"] = run.M;
  j["N"] = run.N;
  j["total_steps"] = run.total_steps;
  j["iterations"] = run.iterations;
  j["init_doublings"] = run.init_doublings;
  j["q_hat"] = run.q_hat;
  return j;
}

double wall_ms(std::chrono::duration<double> d) { return d.count() * 1e3; }

double parse_norm(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && v >= 1.0) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--norm must be a number >= 1 or inf");
}

Json joint_json(const JointDistribution& joint) {
  Json j;
  j["nodes"] = joint.observed_nodes;
  j["probs"] = joint.probs;
  j["estimated"] = joint.estimated;
  if (joint.estimated) {
    j["r"] = joint.r;
    std::uint64_t steps = 0;
    for (const auto& run : joint.runs) steps += run.total_steps;
    j["total_steps"] = steps;
  }
  return j;
}

std::string join_command(const std::vector<std::string>& args) {
  std::string s = "pbn-steady";
  for (const auto& a : args) s += " " + a;
  return s;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steady-state analysis of probabilistic Boolean networks", "pbn-steady"};
  app.require_subcommand(1);
  bool pretty = false;
  std::string out_path;
  app.add_flag("--pretty", pretty, "human-readable output instead of JSON lines");
  app.add_option("--out", out_path, "write records to this file");

  std::string model_path, predicate, observe, target, source, node, mode = "uniform";
  std::size_t replications = 1, jobs = default_jobs();
  EstimationFlags est;

  auto* steady = app.add_subcommand("steady", "estimate a steady-state meta-state probability");
  steady->add_option("--model", model_path, "model file")->required();
  steady->add_option("--predicate", predicate, "meta state, e.g. \"a=1&3=0\"")->required();
  add_estimation_flags(steady, est, true);
  steady->add_option("--replications", replications, "independent runs")->capture_default_str();
  steady->add_option("--jobs", jobs, "parallel runs");

  bool dump = false;
  std::size_t max_nodes = 20;
  auto* exact = app.add_subcommand("exact", "exact steady-state distribution of a small model");
  exact->add_option("--model", model_path, "model file")->required();
  exact->add_option("--predicate", predicate, "report the probability of this meta state");
  exact->add_option("--observe", observe, "comma-separated nodes for a joint marginal");
  exact->add_flag("--dump", dump, "print every state probability");
  exact->add_option("--max-nodes", max_nodes, "node cap")->capture_default_str();

  auto* influence = app.add_subcommand("influence", "influences of parents on a target node");
  influence->add_option("--model", model_path, "model file")->required();
  influence->add_option("--target", target, "target node")->required();
  influence->add_option("--source", source, "single source node (default: every parent)");
  influence->add_option("--mode", mode, "uniform|exact|estimated")->capture_default_str();
  add_estimation_flags(influence, est, false);
  influence->add_option("--jobs", jobs, "parallel probes");

  std::string kind = "selection", norm_text = "1";
  std::size_t func = 0;
  std::optional<double> new_p;
  bool exact_mode = false, paired = false;
  auto* sensitivity = app.add_subcommand("sensitivity", "long-run sensitivity of observed nodes");
  sensitivity->add_option("--model", model_path, "model file")->required();
  sensitivity->add_option("--node", node, "perturbed node")->required();
  sensitivity->add_option("--observe", observe, "comma-separated observed nodes")->required();
  sensitivity->add_option("--kind", kind, "selection|onoff")->capture_default_str();
  sensitivity->add_option("--func", func, "function index for --kind selection");
  sensitivity->add_option("--new-p", new_p, "new selection probability for --kind selection");
  sensitivity->add_option("--norm", norm_text, "norm order (number >= 1 or inf)")->capture_default_str();
  sensitivity->add_flag("--exact", exact_mode, "use the exact solver");
  sensitivity->add_flag("--paired", paired, "same seed for every compared model");
  add_estimation_flags(sensitivity, est, false);
  sensitivity->add_option("--jobs", jobs, "parallel probes");

  GeneratorSpec gen;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "write a random model");
  generate->add_option("--nodes", gen.node_count, "node count")->required();
  generate->add_option("--min-funcs", gen.min_funcs)->capture_default_str();
  generate->add_option("--max-funcs", gen.max_funcs)->capture_default_str();
  generate->add_option("--min-parents", gen.min_parents)->capture_default_str();
  generate->add_option("--max-parents", gen.max_parents)->capture_default_str();
  generate->add_option("--perturbation", gen.perturbation)->capture_default_str();
  generate->add_option("--seed", gen_seed, "random seed")->required();

  auto* density_cmd = app.add_subcommand("density", "mean parent count per node");
  density_cmd->add_option("--model", model_path, "model file")->required();

  double safe_r = 0.0, safe_s = 0.95;
  auto* safe = app.add_subcommand("safe-n0", "range of safe initial sample sizes");
  safe->add_option("--r", safe_r, "precision")->required();
  safe->add_option("--s", safe_s, "confidence level")->capture_default_str();

  std::uint64_t steps = 1'000'000;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "simulation throughput");
  bench->add_option("--model", model_path, "model file")->required();
  bench->add_option("--steps", steps, "steps to simulate")->capture_default_str();
  bench->add_option("--seed", bench_seed, "random seed")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    out << shown->help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    err << "error: " << e.what() << "\n\n" << shown->help();
    return ExitCode::usage;
  }

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      err << "error: cannot open '" << out_path << "' for writing\n";
      return ExitCode::failure;
    }
  }
  std::ostream& sink = out_path.empty() ? out : file;
  Emitter emitter{sink, pretty};
  const std::string command = join_command(args);

  try {
    if (steady->parsed()) {
      const TwoStateParams params = to_params(est);
      const std::uint64_t root = require_seed(est);
      if (replications == 0) throw UsageError("--replications must be positive");
      const LoadedModel loaded = load(model_path);
      const PbnModel& model = *loaded.model;
      const MetaPredicate pred = [&] {
        try {
          return MetaPredicate::parse(predicate, model);
        } catch (const ModelError& e) {
          throw UsageError(e.what());
        }
      }();
      const std::size_t resolved_n0 = resolve_n0(params);
      auto network = std::make_shared<const CompiledNetwork>(model);

      std::vector<std::optional<TwoStateRun>> runs(replications);
      std::vector<std::string> failures(replications);
      parallel_for(replications, jobs, [&](std::size_t i) {
        try {
          SimCursor cursor(network, root + i);
          runs[i] = pbn::run(cursor, pred, params);
        } catch (const Error& e) {
          failures[i] = e.what();
        }
      });

      int code = ExitCode::ok;
      double sum = 0.0, sum_sq = 0.0;
      std::size_t done = 0;
      for (std::size_t i = 0; i < replications; ++i) {
        const std::uint64_t seed = root + i;
        if (!runs[i]) {
          err << "error: replication " << i << " (seed " << seed << "): " << failures[i] << '\n';
          code = ExitCode::failure;
          continue;
        }
        Json rec;
        rec["command"] = command;
        rec["model"] = loaded.path;
        rec["model_hash"] = loaded.hash;
        rec["predicate"] = pred.to_string();
        rec["params"] = params_json(params);
        rec["params"]["n0_resolved"] = resolved_n0;
        rec["seed"] = seed;
        rec["replication"] = i;
        rec.update(run_json(*runs[i]));
        rec["wall_time_ms"] = wall_ms(runs[i]->wall_time);
        emitter.emit(rec);
        sum += runs[i]->q_hat;
        sum_sq += runs[i]->q_hat * runs[i]->q_hat;
        ++done;
      }
      if (replications > 1 && done > 0) {
        const double mean = sum / static_cast<double>(done);
        Json rec;
        rec["command"] = command;
        rec["summary"] = true;
        rec["replications"] = replications;
        rec["succeeded"] = done;
        rec["q_hat_mean"] = mean;
        rec["q_hat_sd"] =
            done > 1 ? std::sqrt(std::max(0.0, (sum_sq - done * mean * mean) / (done - 1.0))) : 0.0;
        emitter.emit(rec);
      }
      return code;
    }

    if (exact->parsed()) {
      const LoadedModel loaded = load(model_path);
      const PbnModel& model = *loaded.model;
      ExactOptions options;
      options.max_nodes = max_nodes;
      const ExactSolver solver(model, options);
      const auto start = std::chrono::steady_clock::now();
      const StateDistribution dist = solver.steady_state();
      const auto elapsed = std::chrono::steady_clock::now() - start;
      Json rec;
      rec["command"] = command;
      rec["model"] = loaded.path;
      rec["model_hash"] = loaded.hash;
      rec["nodes"] = model.node_count();
      rec["residual"] = solver.residual(dist);
      if (!predicate.empty()) {
        const MetaPredicate pred = MetaPredicate::parse(predicate, model);
        rec["predicate"] = pred.to_string();
        rec["q"] = meta_probability(dist, pred);
      }
      if (!observe.empty()) {
        const auto nodes = resolve_nodes(model, observe);
        rec["joint"] = {{"nodes", nodes}, {"probs", joint_marginal(dist, nodes)}};
      }
      rec["wall_time_ms"] = wall_ms(elapsed);
      emitter.emit(rec);
      if (dump) {
        for (std::size_t s = 0; s < dist.probs.size(); ++s) {
          emitter.emit(Json{{"state", s}, {"prob", dist.probs[s]}});
        }
      }
      return ExitCode::ok;
    }

    if (influence->parsed()) {
      const LoadedModel loaded = load(model_path);
      const PbnModel& model = *loaded.model;
      const NodeIndex t = resolve_node(model, target);
      std::unique_ptr<ProbabilityOracle> oracle;
      Json extra = Json::object();
      if (mode == "uniform") {
        oracle = std::make_unique<UniformOracle>();
      } else if (mode == "exact") {
        oracle = std::make_unique<ExactOracle>(model);
      } else if (mode == "estimated") {
        const TwoStateParams params = to_params(est);
        extra["params"] = params_json(params);
        extra["seed"] = require_seed(est);
        oracle = std::make_unique<EstimatingOracle>(model, params, *est.seed, jobs);
      } else {
        throw UsageError("--mode must be uniform, exact or estimated");
      }
      const auto start = std::chrono::steady_clock::now();
      Json values = Json::array();
      auto add = [&](NodeIndex k, const NodeInfluence& inf) {
        Json v;
        v["source"] = k;
        if (!model.node(k).name.empty()) v["name"] = model.node(k).name;
        v["influence"] = inf.value;
        v["probes"] = inf.probes;
        values.push_back(v);
      };
      if (!source.empty()) {
        const NodeIndex k = resolve_node(model, source);
        add(k, influence_on_node(model, k, t, *oracle));
      } else {
        const InfluenceReport report = influence_report(model, t, *oracle);
        for (std::size_t i = 0; i < report.sources.size(); ++i) {
          add(report.sources[i], {report.influences[i], report.probes[i]});
        }
      }
      Json rec;
      rec["command"] = command;
      rec["model"] = loaded.path;
      rec["model_hash"] = loaded.hash;
      rec["target"] = t;
      rec["mode"] = std::string(to_string(oracle->mode()));
      rec.update(extra);
      rec["influences"] = values;
      if (auto* e = dynamic_cast<EstimatingOracle*>(oracle.get())) rec["estimation_runs"] = e->probe_count();
      rec["wall_time_ms"] = wall_ms(std::chrono::steady_clock::now() - start);
      emitter.emit(rec);
      return ExitCode::ok;
    }

    if (sensitivity->parsed()) {
      const LoadedModel loaded = load(model_path);
      const PbnModel& model = *loaded.model;
      const NodeIndex n = resolve_node(model, node);
      const auto observed = resolve_nodes(model, observe);
      SensitivityOptions options;
      options.exact = exact_mode;
      options.norm = parse_norm(norm_text);
      options.paired_seeds = paired;
      options.jobs = jobs;
      Json rec;
      rec["command"] = command;
      rec["model"] = loaded.path;
      rec["model_hash"] = loaded.hash;
      rec["kind"] = kind;
      rec["node"] = n;
      rec["observed"] = observed;
      rec["norm"] = norm_text;
      rec["mode"] = exact_mode ? "exact" : "estimated";
      if (!exact_mode) {
        options.params = to_params(est);
        options.seed = require_seed(est);
        rec["params"] = params_json(options.params);
        rec["seed"] = options.seed;
        rec["paired_seeds"] = paired;
      }
      const auto start = std::chrono::steady_clock::now();
      SensitivityResult result;
      if (kind == "selection") {
        if (!new_p) throw UsageError("--new-p is required for --kind selection");
        rec["func"] = func;
        rec["new_p"] = *new_p;
        result = sensitivity_selection_prob(model, n, func, *new_p, observed, options);
      } else if (kind == "onoff") {
        result = sensitivity_onoff(model, n, observed, options);
      } else {
        throw UsageError("--kind must be selection or onoff");
      }
      rec["sensitivity"] = result.value;
      rec["base"] = joint_json(result.base);
      rec["perturbed"] = Json::array();
      for (const auto& p : result.perturbed) rec["perturbed"].push_back(joint_json(p));
      rec["wall_time_ms"] = wall_ms(std::chrono::steady_clock::now() - start);
      emitter.emit(rec);
      return ExitCode::ok;
    }

    if (generate->parsed()) {
      gen.seed = *gen_seed;
      const PbnModel model = [&] {
        try {
          return generate_random(gen);
        } catch (const ModelError& e) {
          throw UsageError(e.what());
        }
      }();
      if (out_path.empty()) {
        serialize_model(model, out);
      } else {
        serialize_model(model, file);
        Json rec;
        rec["command"] = command;
        rec["path"] = out_path;
        rec["nodes"] = model.node_count();
        rec["density"] = density(model);
        out << rec.dump() << '\n';
      }
      return ExitCode::ok;
    }

    if (density_cmd->parsed()) {
      const LoadedModel loaded = load(model_path);
      Json rec;
      rec["command"] = command;
      rec["model"] = loaded.path;
      rec["model_hash"] = loaded.hash;
      rec["nodes"] = loaded.model->node_count();
      rec["density"] = density(*loaded.model);
      emitter.emit(rec);
      return ExitCode::ok;
    }

    if (safe->parsed()) {
      if (!(safe_r > 0.0 && safe_r < 1.0) || !(safe_s > 0.0 && safe_s < 1.0)) {
        throw UsageError("--r and --s must lie in (0,1)");
      }
      const auto range = safe_n0_range(safe_r, safe_s);
      Json rec;
      rec["command"] = command;
      rec["r"] = safe_r;
      rec["s"] = safe_s;
      if (range) {
        rec["range"] = "[" + std::to_string(range->lower) + "," + std::to_string(range->upper) + "]";
        rec["lower"] = range->lower;
        rec["upper"] = range->upper;
      } else {
        rec["range"] = "empty";
      }
      emitter.emit(rec);
      return ExitCode::ok;
    }

    if (bench->parsed()) {
      const LoadedModel loaded = load(model_path);
      SimCursor cursor(*loaded.model, *bench_seed);
      const auto start = std::chrono::steady_clock::now();
      cursor.simulate(steps);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      Json rec;
      rec["command"] = command;
      rec["model"] = loaded.path;
      rec["model_hash"] = loaded.hash;
      rec["nodes"] = loaded.model->node_count();
      rec["density"] = density(*loaded.model);
      rec["steps"] = steps;
      rec["wall_time_ms"] = wall_ms(elapsed);
      rec["steps_per_second"] = elapsed.count() > 0 ? static_cast<double>(steps) / elapsed.count() : 0.0;
      rec["final_ones"] = cursor.state().count_ones();
      emitter.emit(rec);
      return ExitCode::ok;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::failure;
  }
  return ExitCode::usage;
}

}  // namespace pbn::cli
