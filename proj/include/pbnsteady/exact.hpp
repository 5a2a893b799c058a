#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pbnsteady/meta_predicate.hpp"
#include "pbnsteady/model.hpp"

namespace pbn {

/// Probability per state; the state index has node 0 as least significant bit.
struct StateDistribution {
  std::size_t node_count = 0;
  std::vector<double> probs;

  static StateDistribution uniform(std::size_t node_count);
  static StateDistribution point_mass(std::size_t node_count, std::uint64_t state);

  double sum() const;
};

struct ExactOptions {
  std::size_t max_nodes = 20;
  /// Power iteration stops once successive iterates differ by less than this in L1.
  double step_tolerance = 1e-12;
  std::size_t max_iterations = 1'000'000;
};

/// Transition operator of a model applied without forming the 2^n x 2^n matrix.
///
/// The predictor part is stored per source state as the sparse list of
/// successor states reachable by some realization, using the independence of
/// per-node predictor choice. The perturbation part is applied as n one-bit
/// mixing passes followed by removal of the no-flip term.
class ExactSolver {
 public:
  /// Throws ExactError when the model has more than options.max_nodes nodes.
  explicit ExactSolver(const PbnModel& model, ExactOptions options = {});

  std::size_t node_count() const noexcept { return n_; }
  std::size_t state_count() const noexcept { return std::size_t{1} << n_; }

  /// dist * P.
  StateDistribution apply(const StateDistribution& dist) const;

  /// Power iteration from the uniform distribution. Throws ExactError on
  /// non-convergence; requires a perturbation in (0,1) unless the iteration
  /// happens to converge anyway.
  StateDistribution steady_state() const;

  /// ||dist * P - dist||_1.
  double residual(const StateDistribution& dist) const;

 private:
  void apply_into(std::span<const double> in, std::span<double> out,
                  std::vector<double>& scratch) const;

  std::size_t n_;
  double p_;
  ExactOptions options_;
  std::vector<std::uint64_t> offsets_;  // CSR over source states
  std::vector<std::uint32_t> targets_;
  std::vector<double> weights_;
};

StateDistribution apply_transition(const StateDistribution& dist, const PbnModel& model,
                                   const ExactOptions& options = {});

StateDistribution steady_state(const PbnModel& model, const ExactOptions& options = {});

/// Sum of dist over states satisfying pred.
double meta_probability(const StateDistribution& dist, const MetaPredicate& pred);

double exact_meta_probability(const PbnModel& model, const MetaPredicate& pred,
                              const ExactOptions& options = {});

/// Joint marginal of `nodes`; entry index has the first listed node as most
/// significant bit.
std::vector<double> joint_marginal(const StateDistribution& dist,
                                   std::span<const NodeIndex> nodes);

}  // namespace pbn
