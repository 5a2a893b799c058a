#include "pbnsteady/two_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "pbnsteady/error.hpp"

namespace pbn {

namespace {

void require_transition_probs(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("transition probabilities must lie in [0,1]");
  }
  if (!(alpha + beta > 0.0)) {
    throw std::invalid_argument("alpha + beta must be positive");
  }
}

std::uint64_t ceil_at_least_one(double x, std::uint64_t cap) {
  if (!(x > 1.0)) return 1;
  if (x >= static_cast<double>(cap)) return cap;
  return static_cast<std::uint64_t>(std::ceil(x));
}

// Closed forms of n at the corners of the estimable box [1/n0, 1]^2.
double n_at_resolution_floor(double n0, double c) { return (n0 - 1.0) / (4.0 * c); }
double n_at_floor_and_one(double n0, double c) {
  return (n0 - 1.0) * n0 / (c * (1.0 + n0) * (1.0 + n0) * (1.0 + n0));
}

void extend_checked(Trajectory& trajectory, std::uint64_t points, const TwoStateParams& params) {
  if (points > params.max_points) {
    throw EstimationError("required trajectory of " + std::to_string(points) +
                          " points exceeds the limit of " + std::to_string(params.max_points));
  }
  trajectory.extend_to(points);
}

[[noreturn]] void doubling_cap_exceeded(const TwoStateParams& params, const char* what) {
  throw EstimationError("initial sample doubled " + std::to_string(params.max_doublings) +
                        " times without " + what +
                        "; the meta state is unreachable or the chain is not ergodic");
}

// Pilot for heuristic=pitfall_avoidance: both estimates must be nonzero for
// the resolution-floor argument to apply.
InitResult pitfall_init(Trajectory& trajectory, const TwoStateParams& params, std::size_t n0) {
  InitResult result;
  std::uint64_t sample = n0;
  extend_checked(trajectory, params.m0 + sample, params);
  for (;;) {
    result.counts = trajectory.counts_from(params.m0);
    const auto est = estimate_alpha_beta(result.counts);
    if (est.alpha.value_or(0.0) > 0.0 && est.beta.value_or(0.0) > 0.0) {
      result.alpha_hat = est.alpha;
      result.beta_hat = est.beta;
      break;
    }
    if (result.doublings == params.max_doublings) {
      doubling_cap_exceeded(params, "nonzero estimates");
    }
    ++result.doublings;
    sample *= 2;
    extend_checked(trajectory, params.m0 + sample, params);
  }
  result.points = trajectory.size();
  return result;
}

}  // namespace

std::string_view to_string(Heuristic h) {
  switch (h) {
    case Heuristic::none: return "none";
    case Heuristic::pitfall_avoidance: return "pitfall";
    case Heuristic::controlled: return "controlled";
    case Heuristic::simple: return "simple";
  }
  return "unknown";
}

std::optional<Heuristic> parse_heuristic(std::string_view text) {
  if (text == "none") return Heuristic::none;
  if (text == "pitfall" || text == "pitfall_avoidance") return Heuristic::pitfall_avoidance;
  if (text == "controlled") return Heuristic::controlled;
  if (text == "simple") return Heuristic::simple;
  return std::nullopt;
}

void validate(const TwoStateParams& p) {
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (!(p.r > 0.0)) throw std::invalid_argument("precision r must be positive");
  if (!(p.s > 0.0 && p.s < 1.0)) throw std::invalid_argument("confidence s must lie in (0,1)");
  if (p.k < 1) throw std::invalid_argument("lag k must be at least 1");
  if (p.m0 < 1) throw std::invalid_argument("m0 must be at least 1");
  if (p.n0 && *p.n0 < 1) throw std::invalid_argument("n0 must be at least 1");
}

TransitionCounts TransitionCounts::from_sequence(std::span<const std::uint8_t> z) {
  TransitionCounts c;
  for (std::size_t i = 1; i < z.size(); ++i) {
    const int from = z[i - 1] ? 1 : 0;
    const int to = z[i] ? 1 : 0;
    if (from == 0) {
      (to == 0 ? c.c00 : c.c01) += 1;
    } else {
      (to == 0 ? c.c10 : c.c11) += 1;
    }
  }
  return c;
}

AlphaBeta estimate_alpha_beta(const TransitionCounts& counts) {
  AlphaBeta out;
  if (counts.from_zero() > 0) {
    out.alpha = static_cast<double>(counts.c01) / static_cast<double>(counts.from_zero());
  }
  if (counts.from_one() > 0) {
    out.beta = static_cast<double>(counts.c10) / static_cast<double>(counts.from_one());
  }
  return out;
}

double burn_in_m(double alpha, double beta, double epsilon) {
  require_transition_probs(alpha, beta);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
  const double sum = alpha + beta;
  if (sum == 2.0) {
    throw EstimationError(
        "periodic abstraction (alpha = beta = 1); burn-in undefined, increase the lag k");
  }
  const double lambda = std::abs(1.0 - sum);
  if (lambda == 0.0) return 0.0;
  return std::log(epsilon * sum / std::max(alpha, beta)) / std::log(lambda);
}

double normal_half_quantile(double s) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("confidence s must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + s));
}

double asymptotic_variance(double alpha, double beta) {
  require_transition_probs(alpha, beta);
  const double sum = alpha + beta;
  return alpha * beta * (2.0 - sum) / (sum * sum * sum);
}

double sample_size_n(double alpha, double beta, double r, double s) {
  if (!(r > 0.0)) throw std::invalid_argument("precision r must be positive");
  const double z = normal_half_quantile(s);
  return asymptotic_variance(alpha, beta) * z * z / (r * r);
}

std::optional<N0Range> safe_n0_range(double r, double s) {
  if (!(r > 0.0)) throw std::invalid_argument("precision r must be positive");
  const double z = normal_half_quantile(s);
  const double c = r * r / (z * z);

  auto cond_equal = [c](std::uint64_t n0) {
    const auto x = static_cast<double>(n0);
    return n_at_resolution_floor(x, c) >= 2.0 * x;
  };
  auto cond_extreme = [c](std::uint64_t n0) {
    const auto x = static_cast<double>(n0);
    return n_at_floor_and_one(x, c) >= 2.0 * x;
  };

  // cond_extreme holds on an interval around the minimizer of the convex cubic
  // 2c n^3 + 6c n^2 + (6c-1) n + 2c + 1.
  const double centre = std::max(2.0, 1.0 / std::sqrt(6.0 * c) - 1.0);
  if (centre > 1e15) throw std::invalid_argument("precision r too small");
  auto peak = static_cast<std::uint64_t>(std::floor(centre));
  if (!cond_extreme(peak)) {
    if (cond_extreme(peak + 1)) {
      ++peak;
    } else {
      return std::nullopt;
    }
  }

  // Largest n with cond_extreme: exponential search then bisection.
  std::uint64_t good = peak, step = 1;
  while (cond_extreme(good + step)) {
    good += step;
    step *= 2;
  }
  std::uint64_t bad = good + step;
  while (bad - good > 1) {
    const std::uint64_t mid = good + (bad - good) / 2;
    (cond_extreme(mid) ? good : bad) = mid;
  }
  const std::uint64_t upper = good;

  // Smallest n >= 2 with cond_extreme.
  std::uint64_t lower = 2;
  if (!cond_extreme(2)) {
    std::uint64_t lo = 2, hi = peak;  // cond false at lo, true at hi
    while (hi - lo > 1) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      (cond_extreme(mid) ? hi : lo) = mid;
    }
    lower = hi;
  }

  // cond_equal holds on [ceil(1/(1-8c)), inf) when c < 1/8.
  if (!(8.0 * c < 1.0)) return std::nullopt;
  auto equal_lower =
      static_cast<std::uint64_t>(std::max(2.0, std::ceil(1.0 / (1.0 - 8.0 * c))));
  while (equal_lower > 2 && cond_equal(equal_lower - 1)) --equal_lower;
  while (!cond_equal(equal_lower)) ++equal_lower;
  lower = std::max(lower, equal_lower);

  if (lower > upper) return std::nullopt;
  return N0Range{lower, upper};
}

std::size_t resolve_n0(const TwoStateParams& params) {
  if (params.heuristic == Heuristic::pitfall_avoidance) {
    const auto range = safe_n0_range(params.r, params.s);
    if (!range) {
      throw EstimationError("pitfall avoidance: no safe initial sample size exists for r=" +
                            std::to_string(params.r) + ", s=" + std::to_string(params.s));
    }
    if (!params.n0) return range->upper;
    return std::clamp<std::size_t>(*params.n0, range->lower, range->upper);
  }
  if (params.n0) return *params.n0;
  if (const auto range = safe_n0_range(params.r, params.s)) return range->upper;
  return 1000;
}

PbnBinarySource::PbnBinarySource(SimCursor& cursor, const MetaPredicate& pred, std::size_t lag)
    : cursor_(cursor), pred_(pred), lag_(lag) {
  if (lag_ < 1) throw std::invalid_argument("subsampling lag must be at least 1");
  if (pred_.node_count() != cursor_.network().node_count()) {
    throw std::invalid_argument("predicate and network have different node counts");
  }
}

MarkovTwoStateSource::MarkovTwoStateSource(double alpha, double beta, std::uint64_t seed,
                                           bool initial, std::size_t lag)
    : alpha_(alpha), beta_(beta), rng_(seed), state_(initial), lag_(lag) {
  if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("transition probabilities must lie in [0,1]");
  }
  if (lag_ < 1) throw std::invalid_argument("subsampling lag must be at least 1");
}

bool ScriptedSource::next() {
  if (position_ >= points_.size()) throw EstimationError("scripted sequence exhausted");
  return points_[position_++] != 0;
}

void Trajectory::extend_to(std::uint64_t points) {
  if (points > max_points_) {
    throw EstimationError("trajectory limit of " + std::to_string(max_points_) +
                          " points exceeded");
  }
  if (points <= size_) return;
  bits_.resize((points + 63) / 64, 0);
  bool previous = size_ > 0 && at(size_ - 1);
  for (; size_ < points; ++size_) {
    const bool bit = source_.next();
    if (bit) {
      bits_[size_ >> 6] |= std::uint64_t{1} << (size_ & 63);
      ++ones_;
    }
    if (size_ > 0) {
      if (previous) {
        (bit ? counts_.c11 : counts_.c10) += 1;
      } else {
        (bit ? counts_.c01 : counts_.c00) += 1;
      }
    }
    previous = bit;
  }
}

TransitionCounts Trajectory::counts_from(std::uint64_t burn) const {
  if (burn + 1 >= size_) return {};
  TransitionCounts out = counts_;
  for (std::uint64_t i = 0; i < burn; ++i) {
    const bool from = at(i);
    const bool to = at(i + 1);
    if (from) {
      (to ? out.c11 : out.c10) -= 1;
    } else {
      (to ? out.c01 : out.c00) -= 1;
    }
  }
  return out;
}

std::uint64_t Trajectory::ones_from(std::uint64_t burn) const {
  if (burn >= size_) return 0;
  std::uint64_t prefix = 0;
  for (std::uint64_t i = 0; i < burn; ++i) prefix += at(i) ? 1 : 0;
  return ones_ - prefix;
}

InitResult controlled_init(Trajectory& trajectory, const TwoStateParams& params, std::size_t n0) {
  InitResult result;
  const std::uint64_t m0 = params.m0;
  std::uint64_t sample = n0;
  extend_checked(trajectory, m0 + sample, params);

  AlphaBeta est;
  for (;;) {
    result.counts = trajectory.counts_from(m0);
    est = estimate_alpha_beta(result.counts);
    if (est.alpha.value_or(0.0) > 0.0 && est.beta.value_or(0.0) > 0.0) break;
    if (result.doublings == params.max_doublings) doubling_cap_exceeded(params, "nonzero estimates");
    ++result.doublings;
    sample *= 2;
    extend_checked(trajectory, m0 + sample, params);
  }

  // Size the sample so the smaller of the two probabilities is known within
  // half its own value at confidence s; roles follow whichever is smaller now.
  const double z = normal_half_quantile(params.s);
  for (std::size_t round = 0; round < params.max_iterations; ++round) {
    const bool alpha_smaller = *est.alpha <= *est.beta;
    const double small = alpha_smaller ? *est.alpha : *est.beta;
    const double other = alpha_smaller ? *est.beta : *est.alpha;
    const auto source_transitions =
        static_cast<double>(alpha_smaller ? result.counts.from_zero() : result.counts.from_one());

    const double bernoulli_var = small * (1.0 - small);
    const double variance = source_transitions > 1.0 && bernoulli_var > 0.0
                                ? bernoulli_var * source_transitions / (source_transitions - 1.0)
                                : 0.0;
    const double half_width_ratio = z / (small / 2.0);
    const double needed_source = variance * half_width_ratio * half_width_ratio;
    const double needed = (small + other) / other * needed_source;

    const auto used = static_cast<double>(result.counts.total());
    if (needed <= used) break;

    ++result.refinement_rounds;
    extend_checked(trajectory, m0 + ceil_at_least_one(needed, params.max_points) + 1, params);
    result.counts = trajectory.counts_from(m0);
    est = estimate_alpha_beta(result.counts);
    // Extending a sample can only add transitions, so both stay defined; a
    // zero estimate would make the target size vanish and end the loop.
  }

  result.alpha_hat = est.alpha;
  result.beta_hat = est.beta;
  result.points = trajectory.size();
  return result;
}

InitResult simple_init(Trajectory& trajectory, const TwoStateParams& params, std::size_t n0) {
  InitResult result;
  std::uint64_t sample = n0;
  extend_checked(trajectory, params.m0 + sample, params);
  for (;;) {
    result.counts = trajectory.counts_from(params.m0);
    if (result.counts.c01 >= 3 && result.counts.c10 >= 3) break;
    if (result.doublings == params.max_doublings) {
      doubling_cap_exceeded(params, "observing three transitions in each direction");
    }
    ++result.doublings;
    sample *= 2;
    extend_checked(trajectory, params.m0 + sample, params);
  }
  const auto est = estimate_alpha_beta(result.counts);
  result.alpha_hat = est.alpha;
  result.beta_hat = est.beta;
  result.points = trajectory.size();
  return result;
}

TwoStateRun run(BinarySource& source, const TwoStateParams& params) {
  const auto start = std::chrono::steady_clock::now();
  validate(params);
  if (source.lag() != params.k) {
    throw std::invalid_argument("source lag does not match params.k");
  }

  TwoStateRun out;
  out.params = params;
  out.n0 = resolve_n0(params);

  Trajectory trajectory(source, params.max_points);
  InitResult init;
  switch (params.heuristic) {
    case Heuristic::none:
      extend_checked(trajectory, params.m0 + out.n0, params);
      break;
    case Heuristic::pitfall_avoidance:
      init = pitfall_init(trajectory, params, out.n0);
      break;
    case Heuristic::controlled:
      init = controlled_init(trajectory, params, out.n0);
      break;
    case Heuristic::simple:
      init = simple_init(trajectory, params, out.n0);
      break;
  }
  out.init_doublings = init.doublings;
  out.init_refinements = init.refinement_rounds;

  std::uint64_t burn = params.m0;
  for (;;) {
    if (out.iterations == params.max_iterations) {
      throw EstimationError("no convergence within " + std::to_string(params.max_iterations) +
                            " iterations");
    }
    ++out.iterations;
    const TransitionCounts counts = trajectory.counts_from(burn);
    const AlphaBeta est = estimate_alpha_beta(counts);
    if (!est.alpha || !est.beta) {
      throw EstimationError(std::string("transition probability undefined: no transitions "
                                        "observed out of meta state ") +
                            (!est.alpha ? "0" : "1") + " (" +
                            std::to_string(trajectory.size()) + " points sampled)");
    }
    const double m = burn_in_m(*est.alpha, *est.beta, params.epsilon);
    const double n = sample_size_n(*est.alpha, *est.beta, params.r, params.s);
    const std::uint64_t t = ceil_at_least_one(m, params.max_points);
    const std::uint64_t sample = ceil_at_least_one(n, params.max_points);

    out.alpha_hat = *est.alpha;
    out.beta_hat = *est.beta;
    out.counts = counts;
    out.burn_in_points = t;
    out.sample_points = sample;
    burn = t;

    if (trajectory.size() >= t + sample) break;
    extend_checked(trajectory, t + sample, params);
  }

  const std::uint64_t kept = trajectory.size() - burn;
  out.q_hat = static_cast<double>(trajectory.ones_from(burn)) / static_cast<double>(kept);
  out.M = 1 + (out.burn_in_points - 1) * params.k;
  out.N = 1 + (out.sample_points - 1) * params.k;
  out.points = trajectory.size();
  out.total_steps = trajectory.original_length();
  out.wall_time = std::chrono::steady_clock::now() - start;
  return out;
}

TwoStateRun run(SimCursor& cursor, const MetaPredicate& pred, const TwoStateParams& params) {
  if (!(cursor.network().perturbation() > 0.0)) {
    throw EstimationError(
        "the two-state estimator needs a perturbation probability in (0,1); "
        "without perturbations the chain need not be ergodic");
  }
  PbnBinarySource source(cursor, pred, params.k);
  return run(source, params);
}

}  // namespace pbn
