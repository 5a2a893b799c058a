#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pbnsteady/alias_table.hpp"
#include "pbnsteady/meta_predicate.hpp"
#include "pbnsteady/model.hpp"
#include "pbnsteady/network_state.hpp"
#include "pbnsteady/random.hpp"

namespace pbn {

/// Flattened, read-only form of a model laid out for the simulation loop.
/// Shared between cursors.
class CompiledNetwork {
 public:
  explicit CompiledNetwork(const PbnModel& model);

  struct Function {
    std::uint32_t parent_begin;
    std::uint32_t parent_count;
    std::uint32_t table_begin;  // into table words
  };

  std::size_t node_count() const noexcept { return node_count_; }
  double perturbation() const noexcept { return perturbation_; }
  /// (1-p)^n, the probability that a step applies predictor functions.
  double function_step_prob() const noexcept { return function_step_prob_; }
  double log_no_flip() const noexcept { return log_no_flip_; }

  std::uint32_t first_function(std::size_t node) const noexcept { return node_begin_[node]; }
  std::uint32_t function_count(std::size_t node) const noexcept {
    return node_begin_[node + 1] - node_begin_[node];
  }
  const AliasTable& selector(std::size_t node) const noexcept { return selectors_[node]; }

  bool evaluate(std::uint32_t function, const NetworkState& state) const noexcept {
    const Function& f = functions_[function];
    const std::uint32_t* p = parents_.data() + f.parent_begin;
    const auto words = state.words();
    std::size_t index = 0;
    for (std::uint32_t k = 0; k < f.parent_count; ++k) {
      index = (index << 1) | ((words[p[k] >> 6] >> (p[k] & 63)) & 1u);
    }
    return (tables_[f.table_begin + (index >> 6)] >> (index & 63)) & 1u;
  }

 private:
  std::size_t node_count_;
  double perturbation_;
  double function_step_prob_;
  double log_no_flip_;
  std::vector<std::uint32_t> node_begin_;
  std::vector<Function> functions_;
  std::vector<std::uint32_t> parents_;
  std::vector<std::uint64_t> tables_;
  std::vector<AliasTable> selectors_;
};

/// Which branch a step takes. Anything other than `natural` exists for tests:
/// the branch is still gated by the same uniform draw so the random stream
/// stays aligned, but the outcome of the gate is overridden.
enum class PerturbationPath { natural, never, always };

/// A trajectory under construction: the current state plus the random stream.
///
/// Random draw order per step (part of the reproducibility contract):
///   1. one uniform deciding whether the perturbation vector is zero;
///   2a. zero vector: for node 0..n-1 with more than one predictor, one uniform
///       decoded through that node's alias table;
///   2b. nonzero vector: geometric gaps between flipped positions, one uniform
///       per gap, redrawn from scratch until at least one flip lands below n.
template <PerturbationPath Path>
class BasicSimCursor {
 public:
  /// Starts from a uniformly random state drawn from the stream.
  BasicSimCursor(std::shared_ptr<const CompiledNetwork> network, std::uint64_t seed)
      : network_(std::move(network)), rng_(seed), state_(network_->node_count()),
        next_(network_->node_count()) {
    check_path();
    auto words = state_.words();
    for (auto& w : words) w = rng_();
    const std::size_t tail = network_->node_count() % 64;
    if (tail != 0) words.back() &= (std::uint64_t{1} << tail) - 1;
  }

  BasicSimCursor(std::shared_ptr<const CompiledNetwork> network, std::uint64_t seed,
                 NetworkState initial)
      : network_(std::move(network)), rng_(seed), state_(std::move(initial)),
        next_(network_->node_count()) {
    check_path();
    if (state_.size() != network_->node_count()) {
      throw std::invalid_argument("initial state size does not match the network");
    }
  }

  BasicSimCursor(const PbnModel& model, std::uint64_t seed)
      : BasicSimCursor(std::make_shared<const CompiledNetwork>(model), seed) {}

  BasicSimCursor(const PbnModel& model, std::uint64_t seed, NetworkState initial)
      : BasicSimCursor(std::make_shared<const CompiledNetwork>(model), seed, std::move(initial)) {}

  const NetworkState& state() const noexcept { return state_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const CompiledNetwork& network() const noexcept { return *network_; }

  const NetworkState& step() {
    advance();
    return state_;
  }

  void simulate(std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i) advance();
  }

 private:
  void check_path() const {
    if constexpr (Path == PerturbationPath::always) {
      if (network_->perturbation() <= 0.0) {
        throw std::invalid_argument("forced perturbation path needs a positive perturbation");
      }
    }
  }

  void advance() {
    const CompiledNetwork& net = *network_;
    const double gate = uniform01(rng_);
    bool apply_functions = gate < net.function_step_prob();
    if constexpr (Path == PerturbationPath::never) apply_functions = true;
    if constexpr (Path == PerturbationPath::always) apply_functions = false;

    if (apply_functions) {
      const std::size_t n = net.node_count();
      auto out = next_.words();
      for (auto& w : out) w = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t f = net.first_function(i);
        if (net.function_count(i) > 1) f += net.selector(i).sample(rng_);
        if (net.evaluate(f, state_)) out[i >> 6] |= std::uint64_t{1} << (i & 63);
      }
      std::swap(state_, next_);
    } else {
      flip_random_nonempty();
    }
    ++steps_;
  }

  // Bernoulli(p) flips per node conditioned on at least one flip.
  void flip_random_nonempty() {
    const CompiledNetwork& net = *network_;
    const auto n = static_cast<double>(net.node_count());
    const double log_q = net.log_no_flip();
    for (;;) {
      double position = -1.0;
      bool flipped = false;
      for (;;) {
        // Number of non-flipped nodes before the next flip.
        const double gap = log_q < 0.0 ? std::floor(std::log(uniform_open01(rng_)) / log_q) : n;
        position += gap + 1.0;
        if (position >= n) break;
        state_.flip(static_cast<std::size_t>(position));
        flipped = true;
      }
      if (flipped) return;
    }
  }

  std::shared_ptr<const CompiledNetwork> network_;
  Rng rng_;
  NetworkState state_;
  NetworkState next_;
  std::uint64_t steps_ = 0;
};

using SimCursor = BasicSimCursor<PerturbationPath::natural>;

extern template class BasicSimCursor<PerturbationPath::natural>;

/// Projects states at offsets 1, 1+k, 1+2k, ... onto `pred`; advances the
/// cursor by 1+(count-1)k steps. lag must be at least 1.
template <PerturbationPath Path>
std::vector<std::uint8_t> sample_binary_sequence(BasicSimCursor<Path>& cursor,
                                                 const MetaPredicate& pred, std::size_t count,
                                                 std::size_t lag) {
  if (lag == 0) throw std::invalid_argument("subsampling lag must be at least 1");
  std::vector<std::uint8_t> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    cursor.simulate(t == 0 ? 1 : lag);
    out.push_back(pred.matches(cursor.state()) ? 1 : 0);
  }
  return out;
}

}  // namespace pbn
