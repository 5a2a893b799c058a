#include "pbnsteady/exact.hpp"

#include <cmath>
#include <numeric>

#include "pbnsteady/error.hpp"

namespace pbn {

StateDistribution StateDistribution::uniform(std::size_t node_count) {
  StateDistribution d;
  d.node_count = node_count;
  const std::size_t size = std::size_t{1} << node_count;
  d.probs.assign(size, 1.0 / static_cast<double>(size));
  return d;
}

StateDistribution StateDistribution::point_mass(std::size_t node_count, std::uint64_t state) {
  StateDistribution d;
  d.node_count = node_count;
  d.probs.assign(std::size_t{1} << node_count, 0.0);
  d.probs.at(state) = 1.0;
  return d;
}

double StateDistribution::sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

ExactSolver::ExactSolver(const PbnModel& model, ExactOptions options)
    : n_(model.node_count()), p_(model.perturbation()), options_(options) {
  if (n_ > options_.max_nodes || n_ > 30) {
    throw ExactError("exact analysis limited to " + std::to_string(options_.max_nodes) +
                     " nodes, model has " + std::to_string(n_));
  }
  const std::size_t states = std::size_t{1} << n_;
  offsets_.reserve(states + 1);
  offsets_.push_back(0);

  std::vector<double> prob_one(n_), prob_zero(n_);
  std::vector<std::size_t> uncertain;
  for (std::size_t s = 0; s < states; ++s) {
    auto bit = [s](NodeIndex i) { return ((s >> i) & 1u) != 0; };
    std::uint64_t base = 0;
    uncertain.clear();
    double base_weight = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double one = 0.0, zero = 0.0;
      for (const auto& f : model.node(static_cast<NodeIndex>(i)).functions) {
        if (f.selection_prob == 0.0) continue;
        (f.output(assignment_index(f.parents, bit)) ? one : zero) += f.selection_prob;
      }
      prob_one[i] = one;
      prob_zero[i] = zero;
      if (zero == 0.0) {
        base |= std::uint64_t{1} << i;
        base_weight *= one;
      } else if (one == 0.0) {
        base_weight *= zero;
      } else {
        uncertain.push_back(i);
      }
    }
    // Enumerate the product distribution over nodes with two possible values.
    const std::size_t combos = std::size_t{1} << uncertain.size();
    for (std::size_t c = 0; c < combos; ++c) {
      std::uint64_t target = base;
      double w = base_weight;
      for (std::size_t u = 0; u < uncertain.size(); ++u) {
        const std::size_t node = uncertain[u];
        if ((c >> u) & 1u) {
          target |= std::uint64_t{1} << node;
          w *= prob_one[node];
        } else {
          w *= prob_zero[node];
        }
      }
      targets_.push_back(static_cast<std::uint32_t>(target));
      weights_.push_back(w);
    }
    offsets_.push_back(targets_.size());
  }
}

void ExactSolver::apply_into(std::span<const double> in, std::span<double> out,
                             std::vector<double>& scratch) const {
  const std::size_t states = state_count();
  const double no_flip = std::pow(1.0 - p_, static_cast<double>(n_));

  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t s = 0; s < states; ++s) {
    const double mass = in[s];
    if (mass == 0.0) continue;
    for (std::uint64_t e = offsets_[s]; e < offsets_[s + 1]; ++e) {
      out[targets_[e]] += mass * weights_[e];
    }
  }
  if (p_ == 0.0) return;

  // Full flip kernel (including the no-flip diagonal) as per-bit mixing.
  scratch.assign(in.begin(), in.end());
  for (std::size_t bit = 0; bit < n_; ++bit) {
    const std::size_t stride = std::size_t{1} << bit;
    for (std::size_t s = 0; s < states; ++s) {
      if (s & stride) continue;
      const double a = scratch[s];
      const double b = scratch[s | stride];
      scratch[s] = (1.0 - p_) * a + p_ * b;
      scratch[s | stride] = p_ * a + (1.0 - p_) * b;
    }
  }
  for (std::size_t s = 0; s < states; ++s) {
    const double flipped = scratch[s] - no_flip * in[s];
    out[s] = no_flip * out[s] + (flipped > 0.0 ? flipped : 0.0);
  }
}

StateDistribution ExactSolver::apply(const StateDistribution& dist) const {
  if (dist.probs.size() != state_count()) {
    throw ExactError("distribution size does not match the model");
  }
  StateDistribution out;
  out.node_count = n_;
  out.probs.assign(state_count(), 0.0);
  std::vector<double> scratch;
  apply_into(dist.probs, out.probs, scratch);
  return out;
}

StateDistribution ExactSolver::steady_state() const {
  StateDistribution current = StateDistribution::uniform(n_);
  std::vector<double> next(state_count()), scratch;
  for (std::size_t it = 0; it < options_.max_iterations; ++it) {
    apply_into(current.probs, next, scratch);
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    double delta = 0.0;
    for (std::size_t s = 0; s < next.size(); ++s) {
      next[s] /= total;
      delta += std::abs(next[s] - current.probs[s]);
    }
    current.probs.swap(next);
    if (delta < options_.step_tolerance) return current;
  }
  throw ExactError("power iteration did not converge within " +
                   std::to_string(options_.max_iterations) +
                   " iterations (a model without perturbations may cycle)");
}

double ExactSolver::residual(const StateDistribution& dist) const {
  const StateDistribution next = apply(dist);
  double total = 0.0;
  for (std::size_t s = 0; s < next.probs.size(); ++s) total += std::abs(next.probs[s] - dist.probs[s]);
  return total;
}

StateDistribution apply_transition(const StateDistribution& dist, const PbnModel& model,
                                   const ExactOptions& options) {
  return ExactSolver(model, options).apply(dist);
}

StateDistribution steady_state(const PbnModel& model, const ExactOptions& options) {
  return ExactSolver(model, options).steady_state();
}

double meta_probability(const StateDistribution& dist, const MetaPredicate& pred) {
  double total = 0.0;
  for (std::size_t s = 0; s < dist.probs.size(); ++s) {
    if (pred.matches_index(s)) total += dist.probs[s];
  }
  return total;
}

double exact_meta_probability(const PbnModel& model, const MetaPredicate& pred,
                              const ExactOptions& options) {
  return meta_probability(steady_state(model, options), pred);
}

std::vector<double> joint_marginal(const StateDistribution& dist,
                                   std::span<const NodeIndex> nodes) {
  const std::size_t m = nodes.size();
  std::vector<double> out(std::size_t{1} << m, 0.0);
  for (std::size_t s = 0; s < dist.probs.size(); ++s) {
    std::size_t index = 0;
    for (NodeIndex node : nodes) index = (index << 1) | ((s >> node) & 1u);
    out[index] += dist.probs[s];
  }
  return out;
}

}  // namespace pbn
