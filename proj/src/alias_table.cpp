#include "pbnsteady/alias_table.hpp"

#include <cmath>
#include <stdexcept>

namespace pbn {

AliasTable::AliasTable(std::span<const double> dist) {
  const std::size_t k = dist.size();
  if (k == 0) throw std::invalid_argument("alias table: empty distribution");
  double sum = 0.0;
  for (double d : dist) {
    if (!(d >= 0.0)) throw std::invalid_argument("alias table: negative or NaN probability");
    sum += d;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("alias table: probabilities do not sum to 1");
  }

  prob_.assign(k, 1.0);
  alias_.resize(k);
  std::vector<double> scaled(k);
  std::vector<std::uint32_t> small, large;
  small.reserve(k);
  large.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    alias_[i] = static_cast<std::uint32_t>(i);
    scaled[i] = dist[i] * static_cast<double>(k) / sum;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto lo = small.back();
    small.pop_back();
    const auto hi = large.back();
    prob_[lo] = scaled[lo];
    alias_[lo] = hi;
    scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0;
    if (scaled[hi] < 1.0) {
      large.pop_back();
      small.push_back(hi);
    }
  }
  // Leftovers differ from 1 only by rounding.
  for (auto i : small) prob_[i] = 1.0;
  for (auto i : large) prob_[i] = 1.0;
}

std::vector<double> AliasTable::implied_distribution() const {
  const std::size_t k = prob_.size();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] += prob_[i] / static_cast<double>(k);
    out[alias_[i]] += (1.0 - prob_[i]) / static_cast<double>(k);
  }
  return out;
}

}  // namespace pbn
