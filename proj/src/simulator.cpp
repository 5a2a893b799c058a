#include "pbnsteady/simulator.hpp"

#include <limits>

#include "pbnsteady/error.hpp"

namespace pbn {

CompiledNetwork::CompiledNetwork(const PbnModel& model)
    : node_count_(model.node_count()),
      perturbation_(model.perturbation()),
      function_step_prob_(std::pow(1.0 - model.perturbation(), static_cast<double>(node_count_))),
      log_no_flip_(std::log1p(-model.perturbation())) {
  node_begin_.reserve(node_count_ + 1);
  selectors_.reserve(node_count_);
  std::vector<double> weights;
  for (const auto& node : model.nodes()) {
    node_begin_.push_back(static_cast<std::uint32_t>(functions_.size()));
    weights.clear();
    for (const auto& f : node.functions) {
      Function compiled{};
      compiled.parent_begin = static_cast<std::uint32_t>(parents_.size());
      compiled.parent_count = static_cast<std::uint32_t>(f.parents.size());
      compiled.table_begin = static_cast<std::uint32_t>(tables_.size());
      parents_.insert(parents_.end(), f.parents.begin(), f.parents.end());
      const std::size_t entries = f.truth_table.size();
      tables_.resize(tables_.size() + (entries + 63) / 64, 0);
      for (std::size_t b = 0; b < entries; ++b) {
        if (f.truth_table[b]) tables_[compiled.table_begin + b / 64] |= std::uint64_t{1} << (b % 64);
      }
      if (tables_.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw ModelError("model too large to compile");
      }
      functions_.push_back(compiled);
      weights.push_back(f.selection_prob);
    }
    selectors_.emplace_back(weights);
  }
  node_begin_.push_back(static_cast<std::uint32_t>(functions_.size()));
}

template class BasicSimCursor<PerturbationPath::natural>;

}  // namespace pbn
