#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pbnsteady/exact.hpp"
#include "pbnsteady/meta_predicate.hpp"
#include "pbnsteady/model.hpp"
#include "pbnsteady/simulator.hpp"
#include "pbnsteady/two_state.hpp"

namespace pbn {

enum class DistributionMode { uniform, steady_state_estimated, steady_state_exact };

std::string_view to_string(DistributionMode mode);

/// Probabilities of conjunctions of literals under some reference distribution
/// over the states of a model.
class ProbabilityOracle {
 public:
  virtual ~ProbabilityOracle() = default;
  virtual DistributionMode mode() const noexcept = 0;
  /// One probability per conjunction, in order.
  virtual std::vector<double> probabilities(std::span<const std::vector<Literal>> conjunctions) = 0;

  double probability(const std::vector<Literal>& conjunction) {
    return probabilities(std::span(&conjunction, 1)).front();
  }
};

/// Independent fair bits: a conjunction of m literals has probability 2^-m.
class UniformOracle final : public ProbabilityOracle {
 public:
  DistributionMode mode() const noexcept override { return DistributionMode::uniform; }
  std::vector<double> probabilities(std::span<const std::vector<Literal>> conjunctions) override;
};

/// Sums of the exact steady-state distribution, computed once on construction.
class ExactOracle final : public ProbabilityOracle {
 public:
  explicit ExactOracle(const PbnModel& model, const ExactOptions& options = {});
  explicit ExactOracle(StateDistribution dist) : dist_(std::move(dist)) {}

  DistributionMode mode() const noexcept override { return DistributionMode::steady_state_exact; }
  std::vector<double> probabilities(std::span<const std::vector<Literal>> conjunctions) override;

  const StateDistribution& distribution() const noexcept { return dist_; }

 private:
  StateDistribution dist_;
};

/// One two-state estimation per distinct conjunction. The n-th distinct probe
/// requested from this oracle uses seed mix_seed(root_seed, n), so results
/// depend only on the order of requests, not on the number of jobs.
class EstimatingOracle final : public ProbabilityOracle {
 public:
  EstimatingOracle(const PbnModel& model, TwoStateParams params, std::uint64_t root_seed,
                   std::size_t jobs = 1);

  DistributionMode mode() const noexcept override {
    return DistributionMode::steady_state_estimated;
  }
  std::vector<double> probabilities(std::span<const std::vector<Literal>> conjunctions) override;

  const TwoStateParams& params() const noexcept { return params_; }
  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t probe_count() const noexcept { return runs_.size(); }
  /// Run record of an earlier probe, looked up by its canonical predicate text.
  const TwoStateRun* find_run(const std::string& predicate) const;

 private:
  std::shared_ptr<const CompiledNetwork> network_;
  std::size_t node_count_;
  TwoStateParams params_;
  std::uint64_t root_seed_;
  std::size_t jobs_;
  std::map<std::string, TwoStateRun> runs_;
};

/// x -> f(x with x_j=0) xor f(x with x_j=1), over f's parents without j.
/// The constant-0 function when j is not a parent of f.
PredictorFunction partial_derivative(const PredictorFunction& f, NodeIndex j);

/// Disjoint full conjunctions over f.parents covering the assignments where f
/// outputs 1.
std::vector<std::vector<Literal>> satisfying_conjunctions(const PredictorFunction& f);

struct FunctionInfluence {
  double value = 0.0;
  std::size_t probes = 0;
};

/// Probability under the oracle's distribution that toggling x_j toggles f.
FunctionInfluence influence_on_function(const PredictorFunction& f, NodeIndex j,
                                        ProbabilityOracle& oracle);

struct NodeInfluence {
  double value = 0.0;
  std::size_t probes = 0;
};

NodeInfluence influence_on_node(const PbnModel& model, NodeIndex source, NodeIndex target,
                                ProbabilityOracle& oracle);

struct InfluenceReport {
  NodeIndex target = 0;
  DistributionMode mode = DistributionMode::uniform;
  /// Every node appearing as a parent of some predictor of target, ascending.
  std::vector<NodeIndex> sources;
  std::vector<double> influences;
  std::vector<std::size_t> probes;
};

InfluenceReport influence_report(const PbnModel& model, NodeIndex target,
                                 ProbabilityOracle& oracle);

struct JointDistribution {
  std::vector<NodeIndex> observed_nodes;
  /// First observed node is the most significant bit of the index.
  std::vector<double> probs;
  bool estimated = false;
  /// Per-entry precision; 0 for exact distributions.
  double r = 0.0;
  /// Per-entry run metadata when estimated.
  std::vector<TwoStateRun> runs;
};

/// Full conjunction over `nodes` for outcome index `outcome`.
std::vector<Literal> outcome_conjunction(std::span<const NodeIndex> nodes, std::size_t outcome);

/// Throws std::invalid_argument for an empty, oversized or repeated node list.
JointDistribution joint_distribution(std::span<const NodeIndex> nodes, ProbabilityOracle& oracle);

JointDistribution exact_joint_distribution(const PbnModel& model, std::span<const NodeIndex> nodes,
                                           const ExactOptions& options = {});

JointDistribution estimated_joint_distribution(const PbnModel& model,
                                               std::span<const NodeIndex> nodes,
                                               const TwoStateParams& params, std::uint64_t seed,
                                               std::size_t jobs = 1);

/// l-norm of a - b; l may be +infinity.
double lnorm_distance(std::span<const double> a, std::span<const double> b, double l);

struct SensitivityOptions {
  bool exact = false;
  double norm = 1.0;
  TwoStateParams params;
  std::uint64_t seed = 0;
  /// Reuse one seed for every compared model instead of independent seeds.
  bool paired_seeds = false;
  std::size_t jobs = 1;
  ExactOptions exact_options;
};

struct SensitivityResult {
  double value = 0.0;
  JointDistribution base;
  /// One entry per perturbed model.
  std::vector<JointDistribution> perturbed;
};

/// Distance between observed-node joint distributions before and after setting
/// c_func of node to new_p.
SensitivityResult sensitivity_selection_prob(const PbnModel& model, NodeIndex node,
                                             std::size_t func, double new_p,
                                             std::span<const NodeIndex> observed,
                                             const SensitivityOptions& options);

/// Larger of the distances obtained by forcing node to 0 and to 1.
SensitivityResult sensitivity_onoff(const PbnModel& model, NodeIndex node,
                                    std::span<const NodeIndex> observed,
                                    const SensitivityOptions& options);

}  // namespace pbn
