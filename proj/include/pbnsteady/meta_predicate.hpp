#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pbnsteady/model.hpp"
#include "pbnsteady/network_state.hpp"

namespace pbn {

struct Literal {
  NodeIndex node;
  bool value;

  friend bool operator==(const Literal&, const Literal&) = default;
};

/// Conjunction of node=value literals defining meta state 1.
class MetaPredicate {
 public:
  /// Throws ModelError on an empty literal list, a repeated node, or an index
  /// not below node_count.
  MetaPredicate(std::vector<Literal> literals, std::size_t node_count);

  /// Parses "name=1 & 3=0" style text. Terms are node names or indices.
  static MetaPredicate parse(std::string_view text, const PbnModel& model);

  const std::vector<Literal>& literals() const noexcept { return literals_; }
  std::size_t node_count() const noexcept { return node_count_; }

  bool matches(const NetworkState& state) const noexcept {
    const auto words = state.words();
    for (const auto& m : masks_) {
      if ((words[m.word] & m.mask) != m.expected) return false;
    }
    return true;
  }

  /// Same test on a state given as an integer (node 0 least significant).
  bool matches_index(std::uint64_t state) const noexcept {
    for (const auto& l : literals_) {
      if (((state >> l.node) & 1u) != static_cast<std::uint64_t>(l.value)) return false;
    }
    return true;
  }

  /// Canonical "i=v&j=w" text using node indices.
  std::string to_string() const;

  friend bool operator==(const MetaPredicate& a, const MetaPredicate& b) {
    return a.literals_ == b.literals_ && a.node_count_ == b.node_count_;
  }

 private:
  struct WordMask {
    std::size_t word;
    std::uint64_t mask;
    std::uint64_t expected;
  };

  std::vector<Literal> literals_;
  std::vector<WordMask> masks_;
  std::size_t node_count_;
};

/// Returns 1 iff every literal of `pred` holds in `state`.
inline bool project(const NetworkState& state, const MetaPredicate& pred) {
  return pred.matches(state);
}

}  // namespace pbn
