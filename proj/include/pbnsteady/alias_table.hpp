#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pbnsteady/random.hpp"

namespace pbn {

/// Walker/Vose alias table: O(K) construction, O(1) sampling from a finite
/// distribution.
class AliasTable {
 public:
  AliasTable() = default;

  /// Throws std::invalid_argument on an empty input, a negative entry, or a
  /// sum further than 1e-9 from 1.
  explicit AliasTable(std::span<const double> dist);

  std::size_t size() const noexcept { return prob_.size(); }
  std::span<const double> prob() const noexcept { return prob_; }
  std::span<const std::uint32_t> alias() const noexcept { return alias_; }

  /// Maps one uniform u in [0,1) to an outcome: column floor(u*K), kept if the
  /// fractional part is below prob[column], otherwise replaced by its alias.
  std::uint32_t decode(double u) const noexcept {
    const double x = u * static_cast<double>(prob_.size());
    auto column = static_cast<std::size_t>(x);
    if (column >= prob_.size()) column = prob_.size() - 1;
    return (x - static_cast<double>(column)) < prob_[column] ? static_cast<std::uint32_t>(column)
                                                             : alias_[column];
  }

  std::uint32_t sample(Rng& rng) const noexcept { return decode(uniform01(rng)); }

  /// The distribution realized by the table, recovered from (prob, alias).
  std::vector<double> implied_distribution() const;

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace pbn
