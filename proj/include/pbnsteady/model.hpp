#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pbn {

using NodeIndex = std::uint32_t;

/// One Boolean predictor for a node.
///
/// truth_table[i] is the output for the parent assignment whose bits, read
/// with parents[0] as the most significant bit, form the integer i. A
/// function with no parents is a constant and has a one-entry table.
struct PredictorFunction {
  std::vector<NodeIndex> parents;
  std::vector<std::uint8_t> truth_table;
  double selection_prob = 1.0;

  bool output(std::size_t assignment) const { return truth_table[assignment] != 0; }

  friend bool operator==(const PredictorFunction&, const PredictorFunction&) = default;
};

struct NodeSpec {
  std::string name;  // may be empty
  std::vector<PredictorFunction> functions;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

/// A probabilistic Boolean network with independent predictor selection and
/// per-node flip perturbations. Instances are validated on construction and
/// immutable afterwards.
class PbnModel {
 public:
  /// Throws ModelError if any invariant is violated. perturbation must lie in
  /// (0, 1) or be exactly 0.
  PbnModel(std::vector<NodeSpec> nodes, double perturbation);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const NodeSpec& node(NodeIndex i) const { return nodes_.at(i); }
  std::span<const NodeSpec> nodes() const noexcept { return nodes_; }
  double perturbation() const noexcept { return perturbation_; }

  std::optional<NodeIndex> find_node(std::string_view name) const;

  /// Number of realizations, the product of per-node function counts.
  /// Saturates at UINT64_MAX.
  std::uint64_t realization_count() const noexcept;

  friend bool operator==(const PbnModel&, const PbnModel&) = default;

 private:
  std::vector<NodeSpec> nodes_;
  double perturbation_;
};

/// Bounds for random model generation.
struct GeneratorSpec {
  std::size_t node_count = 1;
  std::size_t min_funcs = 1;
  std::size_t max_funcs = 1;
  std::size_t min_parents = 0;
  std::size_t max_parents = 0;
  std::uint64_t seed = 0;
  double perturbation = 0.001;
};

PbnModel parse_model(std::istream& in);
PbnModel parse_model(std::string_view text);
PbnModel load_model(const std::string& path);

void serialize_model(const PbnModel& model, std::ostream& out);
std::string serialize_model(const PbnModel& model);

/// Total parent count over all predictor functions divided by node count.
double density(const PbnModel& model);

/// Deterministic in spec (including seed). Throws ModelError on invalid bounds.
PbnModel generate_random(const GeneratorSpec& spec);

/// Sets c_j of `node` to new_p and rescales the node's other selection
/// probabilities proportionally so they still sum to 1.
PbnModel perturb_selection_prob(const PbnModel& model, NodeIndex node, std::size_t func,
                                double new_p);

/// Replaces every predictor of `node` by the constant `value`.
PbnModel force_node_constant(const PbnModel& model, NodeIndex node, bool value);

/// Truth-table index of the parent assignment seen in `bits`, first parent most
/// significant. bits(i) must return node i's value.
template <typename BitAccess>
std::size_t assignment_index(std::span<const NodeIndex> parents, BitAccess&& bits) {
  std::size_t index = 0;
  for (NodeIndex p : parents) index = (index << 1) | (bits(p) ? 1u : 0u);
  return index;
}

}  // namespace pbn
