#include "pbnsteady/meta_predicate.hpp"

#include <algorithm>
#include <charconv>

#include "pbnsteady/error.hpp"

namespace pbn {

namespace {

std::string strip_spaces(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
  }
  return out;
}

}  // namespace

MetaPredicate::MetaPredicate(std::vector<Literal> literals, std::size_t node_count)
    : literals_(std::move(literals)), node_count_(node_count) {
  if (literals_.empty()) throw ModelError("predicate must contain at least one literal");
  for (std::size_t a = 0; a < literals_.size(); ++a) {
    if (literals_[a].node >= node_count_) {
      throw ModelError("predicate node " + std::to_string(literals_[a].node) + " out of range");
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (literals_[a].node == literals_[b].node) {
        throw ModelError("predicate mentions node " + std::to_string(literals_[a].node) +
                         " twice");
      }
    }
  }
  for (const auto& l : literals_) {
    const std::size_t word = l.node >> 6;
    const std::uint64_t bit = std::uint64_t{1} << (l.node & 63);
    auto it = std::find_if(masks_.begin(), masks_.end(),
                           [&](const WordMask& m) { return m.word == word; });
    if (it == masks_.end()) {
      masks_.push_back({word, 0, 0});
      it = masks_.end() - 1;
    }
    it->mask |= bit;
    if (l.value) it->expected |= bit;
  }
}

MetaPredicate MetaPredicate::parse(std::string_view text, const PbnModel& model) {
  const std::string compact = strip_spaces(text);
  if (compact.empty()) throw ModelError("empty predicate");
  std::vector<Literal> literals;
  std::size_t start = 0;
  while (start <= compact.size()) {
    auto amp = compact.find('&', start);
    if (amp == std::string::npos) amp = compact.size();
    const std::string_view term = std::string_view(compact).substr(start, amp - start);
    const auto eq = term.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 2 != term.size() ||
        (term[eq + 1] != '0' && term[eq + 1] != '1')) {
      throw ModelError("malformed predicate term '" + std::string(term) +
                       "', expected <node>=0 or <node>=1");
    }
    const std::string_view lhs = term.substr(0, eq);
    NodeIndex node = 0;
    if (auto named = model.find_node(lhs)) {
      node = *named;
    } else {
      auto [ptr, ec] = std::from_chars(lhs.data(), lhs.data() + lhs.size(), node);
      if (ec != std::errc{} || ptr != lhs.data() + lhs.size()) {
        throw ModelError("unknown node '" + std::string(lhs) + "' in predicate");
      }
    }
    literals.push_back({node, term[eq + 1] == '1'});
    start = amp + 1;
  }
  return MetaPredicate(std::move(literals), model.node_count());
}

std::string MetaPredicate::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < literals_.size(); ++i) {
    if (i) out += '&';
    out += std::to_string(literals_[i].node);
    out += literals_[i].value ? "=1" : "=0";
  }
  return out;
}

}  // namespace pbn
