#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pbnsteady/meta_predicate.hpp"
#include "pbnsteady/random.hpp"
#include "pbnsteady/simulator.hpp"

namespace pbn {

enum class Heuristic { none, pitfall_avoidance, controlled, simple };

std::string_view to_string(Heuristic h);
/// Accepts "none", "pitfall" (or "pitfall_avoidance"), "controlled", "simple".
std::optional<Heuristic> parse_heuristic(std::string_view text);

struct TwoStateParams {
  double epsilon = 1e-10;
  double r = 1e-3;
  double s = 0.95;
  std::size_t k = 1;
  std::size_t m0 = 5;
  /// Unset means: upper end of safe_n0_range(r, s) when that exists, else 1000.
  std::optional<std::size_t> n0;
  Heuristic heuristic = Heuristic::simple;
  /// Bound on initial-sample doublings before the observable is declared unreachable.
  std::size_t max_doublings = 30;
  /// Bound on main-loop iterations.
  std::size_t max_iterations = 1000;
  /// Bound on the trajectory length in subsampled points.
  std::uint64_t max_points = std::uint64_t{1} << 36;
};

/// Throws std::invalid_argument if a field is out of range.
void validate(const TwoStateParams& params);

struct TransitionCounts {
  std::uint64_t c00 = 0;
  std::uint64_t c01 = 0;
  std::uint64_t c10 = 0;
  std::uint64_t c11 = 0;

  std::uint64_t from_zero() const noexcept { return c00 + c01; }
  std::uint64_t from_one() const noexcept { return c10 + c11; }
  std::uint64_t total() const noexcept { return c00 + c01 + c10 + c11; }

  static TransitionCounts from_sequence(std::span<const std::uint8_t> z);

  friend bool operator==(const TransitionCounts&, const TransitionCounts&) = default;
};

/// Transition-probability estimates; nullopt marks a zero denominator.
struct AlphaBeta {
  std::optional<double> alpha;
  std::optional<double> beta;
};

AlphaBeta estimate_alpha_beta(const TransitionCounts& counts);

/// Burn-in length in two-state steps, log(eps(a+b)/max(a,b)) / log|1-a-b|.
/// Returns 0 when a+b == 1. Throws EstimationError when a+b == 2 (period 2).
double burn_in_m(double alpha, double beta, double epsilon);

/// Standard normal quantile of (1+s)/2.
double normal_half_quantile(double s);

/// Sample size in two-state steps for precision r at confidence s.
double sample_size_n(double alpha, double beta, double r, double s);

/// alpha*beta*(2-alpha-beta)/(alpha+beta)^3.
double asymptotic_variance(double alpha, double beta);

struct N0Range {
  std::uint64_t lower;
  std::uint64_t upper;

  friend bool operator==(const N0Range&, const N0Range&) = default;
};

/// Integers n0 >= 2 for which min(n(1/n0,1/n0), n(1/n0,1)) >= 2 n0, i.e. a
/// pilot sample whose resolution-floor estimates still force at least a
/// doubling of the sample.
std::optional<N0Range> safe_n0_range(double r, double s);

/// n0 actually used by run() for these parameters. Throws EstimationError for
/// pitfall avoidance with an empty safe range.
std::size_t resolve_n0(const TwoStateParams& params);

/// Supplier of the lag-subsampled 0/1 sequence. Each call to next() returns
/// the following point.
class BinarySource {
 public:
  virtual ~BinarySource() = default;
  virtual bool next() = 0;
  /// Original-chain steps between consecutive points.
  virtual std::size_t lag() const noexcept = 0;
};

/// Meta-state projection of a PBN trajectory, every lag-th state starting at
/// the state one step after the cursor's current one.
class PbnBinarySource final : public BinarySource {
 public:
  PbnBinarySource(SimCursor& cursor, const MetaPredicate& pred, std::size_t lag);

  bool next() override {
    cursor_.simulate(started_ ? lag_ : 1);
    started_ = true;
    return pred_.matches(cursor_.state());
  }
  std::size_t lag() const noexcept override { return lag_; }

 private:
  SimCursor& cursor_;
  const MetaPredicate& pred_;
  std::size_t lag_;
  bool started_ = false;
};

/// A genuine two-state Markov chain with 0->1 probability alpha and 1->0
/// probability beta.
class MarkovTwoStateSource final : public BinarySource {
 public:
  MarkovTwoStateSource(double alpha, double beta, std::uint64_t seed, bool initial = false,
                       std::size_t lag = 1);

  bool next() override {
    for (std::size_t i = 0; i < lag_; ++i) {
      const double u = uniform01(rng_);
      state_ = state_ ? !(u < beta_) : (u < alpha_);
    }
    return state_;
  }
  std::size_t lag() const noexcept override { return lag_; }

 private:
  double alpha_;
  double beta_;
  Rng rng_;
  bool state_;
  std::size_t lag_;
};

/// Plays back a fixed sequence; throws EstimationError when exhausted.
class ScriptedSource final : public BinarySource {
 public:
  explicit ScriptedSource(std::vector<std::uint8_t> points, std::size_t lag = 1)
      : points_(std::move(points)), lag_(lag) {}

  bool next() override;
  std::size_t lag() const noexcept override { return lag_; }

 private:
  std::vector<std::uint8_t> points_;
  std::size_t position_ = 0;
  std::size_t lag_;
};

/// Bit-packed growing 0/1 sequence drawn from a BinarySource, with running
/// transition counts so windowed statistics stay cheap for long runs.
class Trajectory {
 public:
  explicit Trajectory(BinarySource& source, std::uint64_t max_points = std::uint64_t{1} << 36)
      : source_(source), max_points_(max_points) {}

  std::uint64_t size() const noexcept { return size_; }
  bool at(std::uint64_t i) const noexcept { return (bits_[i >> 6] >> (i & 63)) & 1u; }

  /// Appends points until size() >= points.
  void extend_to(std::uint64_t points);

  /// Transitions z[i] -> z[i+1] for burn <= i < size()-1.
  TransitionCounts counts_from(std::uint64_t burn) const;
  /// Number of ones among z[burn..size()).
  std::uint64_t ones_from(std::uint64_t burn) const;

  /// Original-chain steps consumed: 1 + (size()-1) * lag.
  std::uint64_t original_length() const noexcept {
    return size_ == 0 ? 0 : 1 + (size_ - 1) * source_.lag();
  }

 private:
  BinarySource& source_;
  std::uint64_t max_points_;
  std::vector<std::uint64_t> bits_;
  std::uint64_t size_ = 0;
  std::uint64_t ones_ = 0;
  TransitionCounts counts_;
};

struct InitResult {
  TransitionCounts counts;
  std::optional<double> alpha_hat;
  std::optional<double> beta_hat;
  /// Points in the trajectory when initialization finished.
  std::uint64_t points = 0;
  std::size_t doublings = 0;
  std::size_t refinement_rounds = 0;
};

/// Doubles the sample until both estimates are nonzero, then extends it until
/// the sample suffices to pin min(alpha, beta) within half its own value at
/// confidence s. Estimates use the points after the first m0.
InitResult controlled_init(Trajectory& trajectory, const TwoStateParams& params, std::size_t n0);

/// Doubles the sample until both 0->1 and 1->0 were observed at least 3 times.
InitResult simple_init(Trajectory& trajectory, const TwoStateParams& params, std::size_t n0);

struct TwoStateRun {
  TwoStateParams params;
  std::size_t n0 = 0;
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  std::uint64_t burn_in_points = 0;  // t
  std::uint64_t sample_points = 0;   // ceil(n)
  std::uint64_t M = 0;
  std::uint64_t N = 0;
  std::uint64_t total_steps = 0;
  std::uint64_t points = 0;
  std::size_t iterations = 0;
  std::size_t init_doublings = 0;
  std::size_t init_refinements = 0;
  TransitionCounts counts;
  double q_hat = 0.0;
  std::chrono::duration<double> wall_time{0};
};

/// The iterative two-state estimator of the steady-state probability of meta
/// state 1.
TwoStateRun run(BinarySource& source, const TwoStateParams& params);

/// Convenience: meta-state projection of a PBN cursor with lag params.k.
TwoStateRun run(SimCursor& cursor, const MetaPredicate& pred, const TwoStateParams& params);

}  // namespace pbn
