#include "pbnsteady/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "pbnsteady/error.hpp"
#include "pbnsteady/parallel.hpp"

namespace pbn {

std::string_view to_string(DistributionMode mode) {
  switch (mode) {
    case DistributionMode::uniform: return "uniform";
    case DistributionMode::steady_state_estimated: return "steady-state-estimated";
    case DistributionMode::steady_state_exact: return "steady-state-exact";
  }
  return "unknown";
}

std::vector<double> UniformOracle::probabilities(
    std::span<const std::vector<Literal>> conjunctions) {
  std::vector<double> out;
  out.reserve(conjunctions.size());
  for (const auto& c : conjunctions) out.push_back(std::ldexp(1.0, -static_cast<int>(c.size())));
  return out;
}

ExactOracle::ExactOracle(const PbnModel& model, const ExactOptions& options)
    : dist_(steady_state(model, options)) {}

std::vector<double> ExactOracle::probabilities(
    std::span<const std::vector<Literal>> conjunctions) {
  std::vector<double> out;
  out.reserve(conjunctions.size());
  for (const auto& c : conjunctions) {
    if (c.empty()) {
      out.push_back(1.0);
      continue;
    }
    out.push_back(meta_probability(dist_, MetaPredicate(c, dist_.node_count)));
  }
  return out;
}

EstimatingOracle::EstimatingOracle(const PbnModel& model, TwoStateParams params,
                                   std::uint64_t root_seed, std::size_t jobs)
    : network_(std::make_shared<const CompiledNetwork>(model)), node_count_(model.node_count()),
      params_(params), root_seed_(root_seed), jobs_(jobs) {
  validate(params_);
  if (model.perturbation() <= 0.0) {
    throw EstimationError("steady-state estimation needs a perturbation probability in (0,1)");
  }
}

const TwoStateRun* EstimatingOracle::find_run(const std::string& predicate) const {
  const auto it = runs_.find(predicate);
  return it == runs_.end() ? nullptr : &it->second;
}

std::vector<double> EstimatingOracle::probabilities(
    std::span<const std::vector<Literal>> conjunctions) {
  std::vector<MetaPredicate> preds;
  std::vector<std::string> keys;
  for (const auto& c : conjunctions) {
    if (c.empty()) continue;
    MetaPredicate pred(c, node_count_);
    std::string key = pred.to_string();
    if (runs_.count(key) || std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
    keys.push_back(std::move(key));
    preds.push_back(std::move(pred));
  }

  const std::size_t first_index = runs_.size();
  std::vector<TwoStateRun> fresh(preds.size());
  parallel_for(preds.size(), jobs_, [&](std::size_t i) {
    SimCursor cursor(network_, mix_seed(root_seed_, first_index + i));
    fresh[i] = run(cursor, preds[i], params_);
  });
  for (std::size_t i = 0; i < preds.size(); ++i) runs_.emplace(keys[i], std::move(fresh[i]));

  std::vector<double> out;
  out.reserve(conjunctions.size());
  for (const auto& c : conjunctions) {
    if (c.empty()) {
      out.push_back(1.0);
      continue;
    }
    out.push_back(runs_.at(MetaPredicate(c, node_count_).to_string()).q_hat);
  }
  return out;
}

PredictorFunction partial_derivative(const PredictorFunction& f, NodeIndex j) {
  PredictorFunction d;
  const auto it = std::find(f.parents.begin(), f.parents.end(), j);
  if (it == f.parents.end()) {
    d.truth_table = {0};
    return d;
  }
  const std::size_t width = f.parents.size();
  const std::size_t pos = static_cast<std::size_t>(it - f.parents.begin());
  const std::size_t bit = width - 1 - pos;  // first parent is the top bit
  d.parents = f.parents;
  d.parents.erase(d.parents.begin() + static_cast<std::ptrdiff_t>(pos));
  const std::size_t rows = std::size_t{1} << (width - 1);
  d.truth_table.resize(rows);
  const std::size_t low_mask = (std::size_t{1} << bit) - 1;
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t low = row & low_mask;
    const std::size_t high = (row & ~low_mask) << 1;
    const std::size_t at0 = high | low;
    const std::size_t at1 = at0 | (std::size_t{1} << bit);
    d.truth_table[row] = f.truth_table[at0] != f.truth_table[at1] ? 1 : 0;
  }
  return d;
}

std::vector<std::vector<Literal>> satisfying_conjunctions(const PredictorFunction& f) {
  std::vector<std::vector<Literal>> out;
  const std::size_t width = f.parents.size();
  for (std::size_t row = 0; row < f.truth_table.size(); ++row) {
    if (!f.truth_table[row]) continue;
    std::vector<Literal> c;
    c.reserve(width);
    for (std::size_t k = 0; k < width; ++k) {
      c.push_back({f.parents[k], ((row >> (width - 1 - k)) & 1u) != 0});
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

double sum_of(std::span<const double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

}  // namespace

FunctionInfluence influence_on_function(const PredictorFunction& f, NodeIndex j,
                                        ProbabilityOracle& oracle) {
  const PredictorFunction d = partial_derivative(f, j);
  const auto probes = satisfying_conjunctions(d);
  if (probes.empty()) return {};
  return {std::clamp(sum_of(oracle.probabilities(probes)), 0.0, 1.0), probes.size()};
}

NodeInfluence influence_on_node(const PbnModel& model, NodeIndex source, NodeIndex target,
                                ProbabilityOracle& oracle) {
  if (source >= model.node_count() || target >= model.node_count()) {
    throw std::invalid_argument("node index out of range");
  }
  // Collect every probe first so an estimating oracle can run them together.
  const auto& functions = model.node(target).functions;
  std::vector<std::vector<std::vector<Literal>>> per_function;
  std::vector<std::vector<Literal>> all;
  for (const auto& f : functions) {
    per_function.push_back(satisfying_conjunctions(partial_derivative(f, source)));
    all.insert(all.end(), per_function.back().begin(), per_function.back().end());
  }
  const std::vector<double> probs = oracle.probabilities(all);

  NodeInfluence result;
  std::size_t offset = 0;
  for (std::size_t fi = 0; fi < functions.size(); ++fi) {
    const std::size_t count = per_function[fi].size();
    const double value =
        std::clamp(sum_of(std::span(probs).subspan(offset, count)), 0.0, 1.0);
    result.value += functions[fi].selection_prob * value;
    result.probes += count;
    offset += count;
  }
  result.value = std::clamp(result.value, 0.0, 1.0);
  return result;
}

InfluenceReport influence_report(const PbnModel& model, NodeIndex target,
                                 ProbabilityOracle& oracle) {
  InfluenceReport report;
  report.target = target;
  report.mode = oracle.mode();
  std::set<NodeIndex> sources;
  for (const auto& f : model.node(target).functions) sources.insert(f.parents.begin(), f.parents.end());
  report.sources.assign(sources.begin(), sources.end());
  for (NodeIndex k : report.sources) {
    const NodeInfluence inf = influence_on_node(model, k, target, oracle);
    report.influences.push_back(inf.value);
    report.probes.push_back(inf.probes);
  }
  return report;
}

std::vector<Literal> outcome_conjunction(std::span<const NodeIndex> nodes, std::size_t outcome) {
  std::vector<Literal> c;
  const std::size_t m = nodes.size();
  c.reserve(m);
  for (std::size_t k = 0; k < m; ++k) c.push_back({nodes[k], ((outcome >> (m - 1 - k)) & 1u) != 0});
  return c;
}

namespace {

void check_observed(std::span<const NodeIndex> nodes) {
  if (nodes.empty()) throw std::invalid_argument("at least one observed node is required");
  if (nodes.size() > 16) throw std::invalid_argument("at most 16 observed nodes are supported");
  std::set<NodeIndex> seen(nodes.begin(), nodes.end());
  if (seen.size() != nodes.size()) throw std::invalid_argument("observed nodes must be distinct");
}

}  // namespace

JointDistribution joint_distribution(std::span<const NodeIndex> nodes, ProbabilityOracle& oracle) {
  check_observed(nodes);
  std::vector<std::vector<Literal>> outcomes;
  const std::size_t count = std::size_t{1} << nodes.size();
  outcomes.reserve(count);
  for (std::size_t o = 0; o < count; ++o) outcomes.push_back(outcome_conjunction(nodes, o));

  JointDistribution joint;
  joint.observed_nodes.assign(nodes.begin(), nodes.end());
  joint.probs = oracle.probabilities(outcomes);
  joint.estimated = oracle.mode() == DistributionMode::steady_state_estimated;
  if (auto* est = dynamic_cast<EstimatingOracle*>(&oracle)) {
    joint.r = est->params().r;
    for (const auto& c : outcomes) {
      joint.runs.push_back(*est->find_run(MetaPredicate(c, est->node_count()).to_string()));
    }
  }
  return joint;
}

JointDistribution exact_joint_distribution(const PbnModel& model, std::span<const NodeIndex> nodes,
                                           const ExactOptions& options) {
  check_observed(nodes);
  for (NodeIndex n : nodes) {
    if (n >= model.node_count()) throw std::invalid_argument("node index out of range");
  }
  JointDistribution joint;
  joint.observed_nodes.assign(nodes.begin(), nodes.end());
  joint.probs = joint_marginal(steady_state(model, options), nodes);
  return joint;
}

JointDistribution estimated_joint_distribution(const PbnModel& model,
                                               std::span<const NodeIndex> nodes,
                                               const TwoStateParams& params, std::uint64_t seed,
                                               std::size_t jobs) {
  EstimatingOracle oracle(model, params, seed, jobs);
  return joint_distribution(nodes, oracle);
}

double lnorm_distance(std::span<const double> a, std::span<const double> b, double l) {
  if (a.size() != b.size()) throw std::invalid_argument("distributions differ in length");
  if (!(l >= 1.0)) throw std::invalid_argument("norm order must be at least 1");
  if (std::isinf(l)) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::pow(std::abs(a[i] - b[i]), l);
  return std::pow(total, 1.0 / l);
}

namespace {

JointDistribution observe(const PbnModel& model, std::span<const NodeIndex> observed,
                          const SensitivityOptions& options, std::uint64_t stream) {
  if (options.exact) return exact_joint_distribution(model, observed, options.exact_options);
  const std::uint64_t seed = options.paired_seeds ? options.seed : mix_seed(options.seed, stream);
  return estimated_joint_distribution(model, observed, options.params, seed, options.jobs);
}

}  // namespace

SensitivityResult sensitivity_selection_prob(const PbnModel& model, NodeIndex node,
                                             std::size_t func, double new_p,
                                             std::span<const NodeIndex> observed,
                                             const SensitivityOptions& options) {
  const PbnModel perturbed = perturb_selection_prob(model, node, func, new_p);
  SensitivityResult result;
  result.base = observe(model, observed, options, 0);
  result.perturbed.push_back(observe(perturbed, observed, options, 1));
  result.value = lnorm_distance(result.perturbed[0].probs, result.base.probs, options.norm);
  return result;
}

SensitivityResult sensitivity_onoff(const PbnModel& model, NodeIndex node,
                                    std::span<const NodeIndex> observed,
                                    const SensitivityOptions& options) {
  SensitivityResult result;
  result.base = observe(model, observed, options, 0);
  for (bool value : {false, true}) {
    const PbnModel forced = force_node_constant(model, node, value);
    result.perturbed.push_back(observe(forced, observed, options, value ? 2 : 1));
    result.value = std::max(
        result.value, lnorm_distance(result.perturbed.back().probs, result.base.probs, options.norm));
  }
  return result;
}

}  // namespace pbn
