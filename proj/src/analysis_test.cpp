#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "pbnsteady/analysis.hpp"
#include "pbnsteady/random.hpp"

using namespace pbn;

namespace {

const PredictorFunction kXor{{0, 1}, {0, 1, 1, 0}, 1.0};
const PredictorFunction kAnd{{0, 1}, {0, 0, 0, 1}, 1.0};

// a := b, b := a, c := a xor b with perturbation p.
PbnModel three_node_model(double p) {
  std::vector<NodeSpec> nodes(3);
  nodes[0].functions = {{{1}, {0, 1}, 0.7}, {{}, {1}, 0.3}};
  nodes[1].functions = {{{0}, {0, 1}, 0.5}, {{}, {0}, 0.5}};
  nodes[2].functions = {kXor};
  return PbnModel(nodes, p);
}

}  // namespace

TEST_CASE("partial derivatives") {
  const PredictorFunction dx = partial_derivative(kXor, 0);
  CHECK(dx.parents == std::vector<NodeIndex>{1});
  CHECK(dx.truth_table == std::vector<std::uint8_t>{1, 1});

  const PredictorFunction da = partial_derivative(kAnd, 0);
  CHECK(da.parents == std::vector<NodeIndex>{1});
  CHECK(da.truth_table == std::vector<std::uint8_t>{0, 1});

  const PredictorFunction db = partial_derivative(kAnd, 1);
  CHECK(db.parents == std::vector<NodeIndex>{0});
  CHECK(db.truth_table == std::vector<std::uint8_t>{0, 1});

  const PredictorFunction none = partial_derivative(kAnd, 5);
  CHECK(none.parents.empty());
  CHECK(none.truth_table == std::vector<std::uint8_t>{0});

  // f(a,b,c) = a ? b : c; derivative in a is b xor c.
  const PredictorFunction mux{{0, 1, 2}, {0, 1, 0, 1, 0, 0, 1, 1}, 1.0};
  const PredictorFunction dm = partial_derivative(mux, 0);
  CHECK(dm.parents == std::vector<NodeIndex>{1, 2});
  CHECK(dm.truth_table == std::vector<std::uint8_t>{0, 1, 1, 0});
}

TEST_CASE("uniform influence") {
  UniformOracle u;
  CHECK(influence_on_function(kXor, 0, u).value == 1.0);
  CHECK(influence_on_function(kAnd, 0, u).value == 0.5);
  CHECK(influence_on_function(kAnd, 7, u).value == 0.0);
  CHECK(influence_on_function(kAnd, 7, u).probes == 0);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t w = 1 + uniform_below(rng, 8);
    PredictorFunction f;
    for (std::size_t k = 0; k < w; ++k) f.parents.push_back(static_cast<NodeIndex>(2 * k + 1));
    for (std::size_t i = 0; i < (std::size_t{1} << w); ++i) f.truth_table.push_back(rng() & 1u);
    for (NodeIndex j : f.parents) {
      CHECK(influence_on_function(f, j, u).value == testing::brute_force_uniform_influence(f, j));
    }
  }
}

TEST_CASE("influence under a given distribution") {
  // P(b = 1) = 0.3 with a independent.
  StateDistribution d;
  d.node_count = 2;
  d.probs = {0.35, 0.35, 0.15, 0.15};  // index = a + 2b
  ExactOracle o(d);
  CHECK(influence_on_function(kAnd, 0, o).value == doctest::Approx(0.3));
  CHECK(influence_on_function(kAnd, 1, o).value == doctest::Approx(0.5));
}

TEST_CASE("influence on a node is the selection-weighted sum") {
  std::vector<NodeSpec> nodes(3);
  nodes[0].functions = {{{}, {0}, 1.0}};
  nodes[1].functions = {{{}, {1}, 1.0}};
  nodes[2].functions = {{{0, 1}, {0, 1, 1, 0}, 0.6}, {{1}, {0, 1}, 0.4}};
  const PbnModel m(nodes, 0.1);
  UniformOracle u;
  CHECK(influence_on_node(m, 0, 2, u).value == doctest::Approx(0.6));
  CHECK(influence_on_node(m, 1, 2, u).value == doctest::Approx(1.0));
  CHECK(influence_on_node(m, 2, 0, u).value == 0.0);

  const InfluenceReport r = influence_report(m, 2, u);
  CHECK(r.sources == std::vector<NodeIndex>{0, 1});
  CHECK(r.influences[0] == doctest::Approx(0.6));
  CHECK(r.mode == DistributionMode::uniform);
}

TEST_CASE("steady-state influence against the exact marginal") {
  const PbnModel m = three_node_model(0.05);
  const StateDistribution pi = steady_state(m);
  ExactOracle exact(m);
  // Derivative of xor is constant 1; derivative of the a := b function in b is 1.
  CHECK(influence_on_node(m, 0, 2, exact).value == doctest::Approx(1.0));
  CHECK(influence_on_node(m, 1, 0, exact).value == doctest::Approx(0.7));
  // AND over (a, b) in a has influence P(b = 1).
  std::vector<NodeSpec> nodes(m.nodes().begin(), m.nodes().end());
  nodes[2].functions = {kAnd};
  const PbnModel with_and(nodes, 0.05);
  ExactOracle exact_and(with_and);
  const double pb = meta_probability(exact_and.distribution(), MetaPredicate({{1, true}}, 3));
  CHECK(influence_on_node(with_and, 0, 2, exact_and).value == doctest::Approx(pb).epsilon(1e-12));
  (void)pi;

  for (auto mode : {0, 1}) {
    std::unique_ptr<ProbabilityOracle> o;
    if (mode == 0) o = std::make_unique<ExactOracle>(m);
    else {
      TwoStateParams p;
      p.r = 0.02;
      o = std::make_unique<EstimatingOracle>(m, p, 5);
    }
    CHECK(influence_on_node(m, 2, 0, *o).value == 0.0);
  }
}

TEST_CASE("estimated influence tracks the exact value") {
  std::vector<NodeSpec> nodes(3);
  nodes[0].functions = {{{1}, {0, 1}, 0.7}, {{}, {1}, 0.3}};
  nodes[1].functions = {{{0}, {0, 1}, 0.5}, {{}, {0}, 0.5}};
  nodes[2].functions = {kAnd};
  const PbnModel m(nodes, 0.05);
  ExactOracle exact(m);
  TwoStateParams p;
  p.r = 0.01;
  EstimatingOracle est(m, p, 11);
  const NodeInfluence e = influence_on_node(m, 0, 2, est);
  const NodeInfluence x = influence_on_node(m, 0, 2, exact);
  CHECK(e.probes == 1);
  CHECK(std::abs(e.value - x.value) <= 2 * p.r * e.probes);
  CHECK(est.probe_count() == 1);
  // The same probe again is served from memory.
  influence_on_node(m, 0, 2, est);
  CHECK(est.probe_count() == 1);
}

TEST_CASE("estimating oracle does not depend on the job count") {
  const PbnModel m = testing::random_small_model(5, 12, 0.02);
  TwoStateParams p;
  p.r = 0.02;
  EstimatingOracle one(m, p, 99, 1), three(m, p, 99, 3);
  const std::vector<NodeIndex> nodes{0, 3};
  const auto a = joint_distribution(nodes, one);
  const auto b = joint_distribution(nodes, three);
  CHECK(a.probs == b.probs);
  CHECK(a.runs.size() == 4);
  CHECK(a.estimated);
  CHECK(a.r == 0.02);
}

TEST_CASE("joint distributions") {
  const PbnModel id = testing::identity_model(0.3);
  const std::vector<NodeIndex> only{0};
  const auto exact = exact_joint_distribution(id, only);
  CHECK(exact.probs[0] == doctest::Approx(0.5));
  CHECK(exact.probs[1] == doctest::Approx(0.5));
  CHECK_FALSE(exact.estimated);

  TwoStateParams p;
  p.r = 0.01;
  const auto est = estimated_joint_distribution(id, only, p, 4);
  CHECK(std::abs(est.probs[0] - 0.5) <= p.r);
  CHECK(std::abs(est.probs[1] - 0.5) <= p.r);

  const PbnModel m = testing::random_small_model(4, 3, 0.05);
  const std::vector<NodeIndex> three{2, 0, 3};
  const auto joint = estimated_joint_distribution(m, three, p, 5);
  REQUIRE(joint.probs.size() == 8);
  double total = 0.0;
  for (double v : joint.probs) total += v;
  CHECK(total >= 1 - 8 * p.r);
  CHECK(total <= 1 + 8 * p.r);

  const auto exact3 = exact_joint_distribution(m, three);
  double sum3 = 0.0;
  for (double v : exact3.probs) sum3 += v;
  CHECK(sum3 == doctest::Approx(1.0).epsilon(1e-10));
  // Entry order: first listed node is the high bit.
  const StateDistribution pi = steady_state(m);
  const double p_101 = meta_probability(pi, MetaPredicate({{2, true}, {0, false}, {3, true}}, 4));
  CHECK(exact3.probs[0b101] == doctest::Approx(p_101).epsilon(1e-12));

  CHECK_THROWS_AS(exact_joint_distribution(m, std::vector<NodeIndex>{}), std::invalid_argument);
  CHECK_THROWS_AS(exact_joint_distribution(m, std::vector<NodeIndex>{1, 1}), std::invalid_argument);
}

TEST_CASE("norms") {
  const std::vector<double> a{0.5, 0.5}, b{0.2, 0.8};
  CHECK(lnorm_distance(a, b, 1.0) == doctest::Approx(0.6));
  CHECK(lnorm_distance(a, b, 2.0) == doctest::Approx(std::sqrt(0.18)));
  CHECK(lnorm_distance(a, b, std::numeric_limits<double>::infinity()) == doctest::Approx(0.3));
  CHECK_THROWS(lnorm_distance(a, b, 0.5));
}

TEST_CASE("selection-probability sensitivity") {
  const PbnModel m = three_node_model(0.02);
  const std::vector<NodeIndex> observed{0, 2};
  SensitivityOptions exact;
  exact.exact = true;
  CHECK(sensitivity_selection_prob(m, 0, 0, 0.7, observed, exact).value == 0.0);

  const double moved = sensitivity_selection_prob(m, 0, 0, 0.735, observed, exact).value;
  CHECK(moved > 0.0);
  CHECK(moved <= 2.0);

  SensitivityOptions est;
  est.params.r = 0.01;
  est.seed = 3;
  const double noise = sensitivity_selection_prob(m, 0, 0, 0.7, observed, est).value;
  CHECK(noise <= 2 * 4 * est.params.r);
  est.paired_seeds = true;
  CHECK(sensitivity_selection_prob(m, 0, 0, 0.7, observed, est).value == 0.0);
}

TEST_CASE("on/off sensitivity") {
  // Node 2 feeds nothing; forcing it leaves the others' joint law unchanged.
  const PbnModel m = three_node_model(0.05);
  SensitivityOptions exact;
  exact.exact = true;
  CHECK(sensitivity_onoff(m, 2, std::vector<NodeIndex>{0, 1}, exact).value <= 1e-9);

  // Swap network: each node is 1/2 on in the long run, so forcing it moves
  // almost all the mass of its own marginal.
  std::vector<NodeSpec> swap(2);
  swap[0].functions = {{{1}, {0, 1}, 1.0}};
  swap[1].functions = {{{0}, {0, 1}, 1.0}};
  const PbnModel s(swap, 0.001);
  const SensitivityResult r = sensitivity_onoff(s, 0, std::vector<NodeIndex>{0}, exact);
  CHECK(r.value == doctest::Approx(1.0).epsilon(0.01));
  CHECK(r.perturbed.size() == 2);
}
