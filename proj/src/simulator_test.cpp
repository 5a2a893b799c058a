#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "pbnsteady/alias_table.hpp"
#include "pbnsteady/error.hpp"
#include "pbnsteady/meta_predicate.hpp"
#include "pbnsteady/simulator.hpp"

using namespace pbn;

namespace {

void check_frequencies(const std::vector<double>& dist, std::size_t samples, std::uint64_t seed) {
  AliasTable table(dist);
  Rng rng(seed);
  std::vector<std::size_t> counts(dist.size(), 0);
  for (std::size_t i = 0; i < samples; ++i) ++counts[table.sample(rng)];
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const double expected = dist[k] * static_cast<double>(samples);
    const double sigma = std::sqrt(static_cast<double>(samples) * dist[k] * (1.0 - dist[k]));
    CHECK(std::abs(static_cast<double>(counts[k]) - expected) <= 3.0 * sigma + 1e-9);
  }
}

}  // namespace

TEST_CASE("alias table point mass") {
  AliasTable table(std::vector<double>{1.0});
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) CHECK(table.sample(rng) == 0);
}

TEST_CASE("alias table frequencies") {
  check_frequencies({0.5, 0.5}, 1'000'000, 11);
  check_frequencies({0.2, 0.3, 0.5}, 1'000'000, 12);
}

TEST_CASE("alias table implied distribution") {
  Rng rng(99);
  for (std::size_t K = 1; K <= 64; ++K) {
    std::vector<double> dist(K);
    double total = 0.0;
    for (auto& d : dist) {
      d = uniform01(rng) < 0.2 ? 0.0 : uniform_open01(rng);
      total += d;
    }
    if (total == 0.0) dist[0] = total = 1.0;
    for (auto& d : dist) d /= total;
    AliasTable table(dist);
    const auto implied = table.implied_distribution();
    double tv = 0.0;
    for (std::size_t k = 0; k < K; ++k) tv += std::abs(implied[k] - dist[k]);
    CHECK(tv <= 1e-12);
  }
}

TEST_CASE("alias table rejects bad input") {
  CHECK_THROWS_AS(AliasTable(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(AliasTable(std::vector<double>{1.2, -0.2}), std::invalid_argument);
  CHECK_THROWS_AS(AliasTable(std::vector<double>{0.5, 0.4}), std::invalid_argument);
}

TEST_CASE("network state packing") {
  NetworkState s(130);
  s.set(0, true);
  s.set(64, true);
  s.set(129, true);
  CHECK(s.count_ones() == 3);
  CHECK(s.words()[1] == 1);
  CHECK(s.words()[2] == 2);
  s.flip(64);
  CHECK_FALSE(s.get(64));
  CHECK(NetworkState::from_index(5, 3).to_string() == "101");
  CHECK(NetworkState::from_index(6, 3).to_index() == 6);
}

TEST_CASE("meta predicate") {
  GeneratorSpec spec;
  spec.node_count = 10;
  spec.max_parents = 2;
  spec.seed = 1;
  const PbnModel model = generate_random(spec);

  const MetaPredicate p = MetaPredicate::parse(" 3 = 1 & 7=0 ", model);
  NetworkState s(10);
  s.set(3, true);
  s.set(7, true);
  CHECK_FALSE(project(s, p));
  s.set(7, false);
  CHECK(project(s, p));
  CHECK(p.to_string() == "3=1&7=0");

  const MetaPredicate single({{4, true}}, 10);
  s.set(4, true);
  CHECK(single.matches(s));

  CHECK_THROWS_AS(MetaPredicate({}, 10), ModelError);
  CHECK_THROWS_AS(MetaPredicate({{1, true}, {1, false}}, 10), ModelError);
  CHECK_THROWS_AS(MetaPredicate({{10, true}}, 10), ModelError);
  CHECK_THROWS(MetaPredicate::parse("3=2", model));
  CHECK_THROWS(MetaPredicate::parse("", model));
  CHECK_THROWS(MetaPredicate::parse("nosuch=1", model));
}

TEST_CASE("meta predicate against brute force") {
  Rng rng(17);
  for (int trial = 0; trial < 10'000; ++trial) {
    const std::size_t n = 1 + uniform_below(rng, 150);
    NetworkState s(n);
    for (std::size_t i = 0; i < n; ++i) s.set(i, (rng() & 1u) != 0);
    const std::size_t m = 1 + uniform_below(rng, std::min<std::size_t>(n, 5));
    std::set<NodeIndex> used;
    std::vector<Literal> lits;
    while (lits.size() < m) {
      const auto node = static_cast<NodeIndex>(uniform_below(rng, n));
      if (!used.insert(node).second) continue;
      lits.push_back({node, (rng() & 1u) != 0});
    }
    bool expected = true;
    for (const auto& l : lits) expected = expected && (s.to_string()[l.node] == (l.value ? '1' : '0'));
    const MetaPredicate p(lits, n);
    CHECK(p.matches(s) == expected);
    if (n <= 64) CHECK(p.matches_index(s.to_index()) == expected);
  }
}

TEST_CASE("deterministic swap without perturbation") {
  std::vector<NodeSpec> nodes(2);
  nodes[0].functions = {{{1}, {0, 1}, 1.0}};
  nodes[1].functions = {{{0}, {0, 1}, 1.0}};
  const PbnModel m(nodes, 0.0);
  SimCursor cursor(m, 1, NetworkState::from_index(0b01, 2));
  CHECK(cursor.step().to_index() == 0b10);
  CHECK(cursor.step().to_index() == 0b01);
  CHECK(cursor.steps() == 2);
}

TEST_CASE("identity model flips at rate p") {
  const PbnModel m = testing::identity_model(0.5);
  SimCursor cursor(m, 2024);
  const std::size_t steps = 1'000'000;
  std::size_t flips = 0;
  bool prev = cursor.state().get(0);
  for (std::size_t i = 0; i < steps; ++i) {
    const bool now = cursor.step().get(0);
    if (now != prev) ++flips;
    prev = now;
  }
  const double sigma = std::sqrt(steps * 0.25);
  CHECK(std::abs(static_cast<double>(flips) - 0.5 * steps) <= 3.0 * sigma);
}

TEST_CASE("perturbation frequency") {
  // Every node keeps its value on the function path, so the state changes
  // exactly on the steps with a nonzero perturbation vector.
  const double p = 0.02;
  const std::size_t n = 6;
  std::vector<NodeSpec> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].functions = {{{static_cast<NodeIndex>(i)}, {0, 1}, 0.7},
                          {{static_cast<NodeIndex>(i)}, {0, 1}, 0.3}};
  }
  const PbnModel m(nodes, p);
  SimCursor cursor(m, 5);
  const std::size_t steps = 500'000;
  std::size_t changed = 0;
  NetworkState prev = cursor.state();
  for (std::size_t i = 0; i < steps; ++i) {
    const NetworkState& now = cursor.step();
    if (!(now == prev)) ++changed;
    prev = now;
  }
  const double expected = 1.0 - std::pow(1.0 - p, static_cast<double>(n));
  const double sigma = std::sqrt(steps * expected * (1.0 - expected));
  CHECK(std::abs(static_cast<double>(changed) - expected * steps) <= 3.0 * sigma);
}

TEST_CASE("forced paths match brute force") {
  const PbnModel m = testing::random_small_model(3, 77, 0.1);
  // Supports of the function-path successors, by enumeration of realizations.
  const auto P = testing::dense_transition_matrix(testing::random_small_model(3, 77, 0.0));
  for (std::uint64_t start = 0; start < 8; ++start) {
    std::map<std::uint64_t, std::size_t> seen;
    const std::size_t draws = 20'000;
    for (std::size_t i = 0; i < draws; ++i) {
      BasicSimCursor<PerturbationPath::never> one(m, 1000 * start + i,
                                                  NetworkState::from_index(start, 3));
      ++seen[one.step().to_index()];
    }
    for (std::uint64_t t = 0; t < 8; ++t) {
      const double prob = P(static_cast<long>(start), static_cast<long>(t));
      const double freq = static_cast<double>(seen[t]) / draws;
      CHECK(((prob > 0.0) == (seen[t] > 0)));
      CHECK(std::abs(freq - prob) <= 4.0 * std::sqrt(prob * (1.0 - prob) / draws) + 1e-12);
    }
  }
  // Forced perturbation path: successors differ from the source by a nonempty flip set.
  BasicSimCursor<PerturbationPath::always> flip(m, 9, NetworkState::from_index(0, 3));
  std::uint64_t prev = 0;
  for (int i = 0; i < 10'000; ++i) {
    const std::uint64_t now = flip.step().to_index();
    CHECK(now != prev);
    prev = now;
  }
  CHECK_THROWS(BasicSimCursor<PerturbationPath::always>(testing::identity_model(0.0), 1));
}

TEST_CASE("flip path distribution") {
  // Conditional on a nonzero perturbation vector, a single node flips with
  // probability p(1-p)^(n-1) / (1 - (1-p)^n) per node.
  const double p = 0.3;
  const PbnModel m = testing::random_small_model(3, 8, p);
  BasicSimCursor<PerturbationPath::always> cursor(m, 4, NetworkState::from_index(0, 3));
  std::map<std::uint64_t, std::size_t> seen;
  const std::size_t draws = 300'000;
  std::uint64_t prev = cursor.state().to_index();
  for (std::size_t i = 0; i < draws; ++i) {
    const std::uint64_t now = cursor.step().to_index();
    ++seen[prev ^ now];
    prev = now;
  }
  const double norm = 1.0 - std::pow(1.0 - p, 3);
  for (std::uint64_t g = 1; g < 8; ++g) {
    const int eta = __builtin_popcountll(g);
    const double expected = std::pow(p, eta) * std::pow(1.0 - p, 3 - eta) / norm;
    const double freq = static_cast<double>(seen[g]) / draws;
    CHECK(std::abs(freq - expected) <= 4.0 * std::sqrt(expected * (1 - expected) / draws));
  }
  CHECK(seen[0] == 0);
}

TEST_CASE("simulate equals repeated step") {
  const PbnModel m = testing::random_small_model(8, 3, 0.05);
  SimCursor a(m, 42), b(m, 42);
  CHECK(a.state() == b.state());
  a.simulate(0);
  CHECK(a.state() == b.state());
  a.simulate(1000);
  for (int i = 0; i < 1000; ++i) b.step();
  CHECK(a.state() == b.state());
  CHECK(a.steps() == 1000);
  SimCursor c(m, 43);
  c.simulate(1000);
  SimCursor d(m, 42);
  d.simulate(1000);
  CHECK(d.state() == a.state());
}

TEST_CASE("sample binary sequence offsets") {
  const PbnModel m = testing::random_small_model(5, 21, 0.1);
  const MetaPredicate pred({{0, true}, {2, false}}, 5);

  SimCursor ref(m, 8);
  std::vector<std::uint8_t> truth;
  for (int i = 0; i < 20; ++i) truth.push_back(pred.matches(ref.step()) ? 1 : 0);

  SimCursor c1(m, 8);
  const auto k1 = sample_binary_sequence(c1, pred, 5, 1);
  CHECK(k1 == std::vector<std::uint8_t>(truth.begin(), truth.begin() + 5));
  CHECK(c1.steps() == 5);

  SimCursor c3(m, 8);
  const auto k3 = sample_binary_sequence(c3, pred, 2, 3);
  CHECK(k3 == std::vector<std::uint8_t>{truth[0], truth[3]});
  CHECK(c3.steps() == 4);

  CHECK_THROWS(sample_binary_sequence(c3, pred, 2, 0));
}

TEST_CASE("identity model binary sequence is the alpha=beta=0.3 chain") {
  const PbnModel m = testing::identity_model(0.3);
  SimCursor cursor(m, 77);
  const MetaPredicate pred({{0, true}}, 1);
  const auto z = sample_binary_sequence(cursor, pred, 1'000'000, 1);
  std::size_t from0 = 0, c01 = 0, from1 = 0, c10 = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i - 1] == 0) {
      ++from0;
      c01 += z[i];
    } else {
      ++from1;
      c10 += 1 - z[i];
    }
  }
  const double a = static_cast<double>(c01) / from0;
  const double b = static_cast<double>(c10) / from1;
  CHECK(std::abs(a - 0.3) <= 3.0 * std::sqrt(0.21 / from0));
  CHECK(std::abs(b - 0.3) <= 3.0 * std::sqrt(0.21 / from1));
}
