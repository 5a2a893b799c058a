#include "pbnsteady/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pbnsteady/error.hpp"
#include "pbnsteady/random.hpp"

namespace pbn {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr std::size_t kMaxParents = 30;

void validate_function(const PredictorFunction& f, std::size_t node_count, std::size_t node,
                       std::size_t func) {
  auto where = [&] {
    return "node " + std::to_string(node) + " function " + std::to_string(func) + ": ";
  };
  if (f.parents.size() > kMaxParents) {
    throw ModelError(where() + "too many parents (" + std::to_string(f.parents.size()) + ")");
  }
  if (f.truth_table.size() != (std::size_t{1} << f.parents.size())) {
    throw ModelError(where() + "truth table has " + std::to_string(f.truth_table.size()) +
                     " entries, expected " +
                     std::to_string(std::size_t{1} << f.parents.size()));
  }
  for (std::size_t a = 0; a < f.parents.size(); ++a) {
    if (f.parents[a] >= node_count) {
      throw ModelError(where() + "parent index " + std::to_string(f.parents[a]) +
                       " out of range");
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (f.parents[a] == f.parents[b]) {
        throw ModelError(where() + "duplicate parent " + std::to_string(f.parents[a]));
      }
    }
  }
  for (auto bit : f.truth_table) {
    if (bit > 1) throw ModelError(where() + "truth table entries must be 0 or 1");
  }
  if (!(f.selection_prob >= 0.0 && f.selection_prob <= 1.0)) {
    throw ModelError(where() + "selection probability outside [0,1]");
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

bool valid_name(std::string_view name) {
  if (name.empty()) return true;
  bool all_digits = true;
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '#' || c == '=' || c == '&' || c == '\n' || c == '\r') {
      return false;
    }
    if (c < '0' || c > '9') all_digits = false;
  }
  return !all_digits;
}

void validate_node(const NodeSpec& node, std::size_t node_count, std::size_t i) {
  if (!valid_name(node.name)) {
    throw ModelError("node " + std::to_string(i) + ": invalid name '" + node.name + "'");
  }
  if (node.functions.empty()) {
    throw ModelError("node " + std::to_string(i) + " has no predictor functions");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < node.functions.size(); ++j) {
    validate_function(node.functions[j], node_count, i, j);
    sum += node.functions[j].selection_prob;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", sum);
    throw ModelError("node " + std::to_string(i) + ": selection probabilities sum to " + buf +
                     ", expected 1");
  }
}

class Parser {
 public:
  explicit Parser(std::istream& in) : in_(in) {}

  PbnModel parse() {
    expect_keyword_line("pbn", [&](std::string_view arg) {
      if (arg != "1") fail("unsupported format version '" + std::string(arg) + "'");
    });
    std::size_t n = 0;
    expect_keyword_line("nodes", [&](std::string_view arg) {
      if (!parse_number(arg, n) || n == 0) fail("node count must be a positive integer");
    });
    double p = 0.0;
    expect_keyword_line("perturbation", [&](std::string_view arg) {
      if (!parse_number(arg, p)) fail("invalid perturbation value");
      if (!(p == 0.0 || (p > 0.0 && p < 1.0))) fail("perturbation must lie in (0,1) or be exactly 0");
    });

    std::vector<NodeSpec> nodes;
    nodes.reserve(n);
    bool ended = false;
    std::string_view line;
    while (next_line(line)) {
      auto words = split_ws(line);
      if (words[0] == "end") {
        if (words.size() != 1) fail("unexpected text after 'end'");
        ended = true;
        break;
      }
      if (words[0] == "node") {
        if (words.size() < 2 || words.size() > 3) fail("expected 'node <index> [<name>]'");
        std::size_t index = 0;
        if (!parse_number(words[1], index)) fail("invalid node index");
        if (index != nodes.size()) {
          fail("node index " + std::to_string(index) + " out of order, expected " +
               std::to_string(nodes.size()));
        }
        if (index >= n) fail("node index " + std::to_string(index) + " exceeds node count");
        node_lines_.push_back(line_no_);
        NodeSpec spec;
        if (words.size() == 3) spec.name = std::string(words[2]);
        nodes.push_back(std::move(spec));
        continue;
      }
      if (words[0] == "func") {
        if (nodes.empty()) fail("'func' before any 'node'");
        nodes.back().functions.push_back(parse_func(line.substr(4), n));
        continue;
      }
      fail("unknown directive '" + std::string(words[0]) + "'");
    }
    if (!ended) fail("missing 'end'");
    while (next_line(line)) fail("unexpected text after 'end'");
    if (nodes.size() != n) {
      fail("declared " + std::to_string(n) + " nodes but found " + std::to_string(nodes.size()));
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      line_no_ = node_lines_[i];
      try {
        validate_node(nodes[i], n, i);
      } catch (const ModelError& e) {
        fail(e.what());
      }
      for (std::size_t k = 0; k < i && !nodes[i].name.empty(); ++k) {
        if (nodes[k].name == nodes[i].name) fail("duplicate node name '" + nodes[i].name + "'");
      }
    }
    try {
      return PbnModel(std::move(nodes), p);
    } catch (const ModelError& e) {
      throw ModelError(std::string("invalid model: ") + e.what());
    }
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(line_no_, message); }

  // Next non-blank line with comments stripped.
  bool next_line(std::string_view& out) {
    while (std::getline(in_, buffer_)) {
      ++line_no_;
      std::string_view view = buffer_;
      if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = trim(view);
      if (!view.empty()) {
        out = view;
        return true;
      }
    }
    return false;
  }

  template <typename Fn>
  void expect_keyword_line(std::string_view keyword, Fn&& handle) {
    std::string_view line;
    if (!next_line(line)) fail("unexpected end of input, expected '" + std::string(keyword) + "'");
    auto words = split_ws(line);
    if (words[0] != keyword || words.size() != 2) {
      fail("expected '" + std::string(keyword) + " <value>'");
    }
    handle(words[1]);
  }

  PredictorFunction parse_func(std::string_view rest, std::size_t n) {
    const auto c1 = rest.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : rest.find(':', c1 + 1);
    if (c2 == std::string_view::npos || rest.find(':', c2 + 1) != std::string_view::npos) {
      fail("expected 'func <prob> : <parents> : <truthbits>'");
    }
    PredictorFunction f;
    if (!parse_number(rest.substr(0, c1), f.selection_prob)) fail("invalid selection probability");

    auto parents = trim(rest.substr(c1 + 1, c2 - c1 - 1));
    if (parents.empty()) fail("empty parent list, write '-' for none");
    if (parents != "-") {
      std::size_t start = 0;
      while (start <= parents.size()) {
        auto comma = parents.find(',', start);
        if (comma == std::string_view::npos) comma = parents.size();
        std::uint64_t idx = 0;
        if (!parse_number(parents.substr(start, comma - start), idx)) fail("invalid parent index");
        if (idx >= n) fail("parent index " + std::to_string(idx) + " out of range");
        f.parents.push_back(static_cast<NodeIndex>(idx));
        start = comma + 1;
      }
    }
    if (f.parents.size() > kMaxParents) fail("too many parents");

    auto bits = trim(rest.substr(c2 + 1));
    const std::size_t expected = std::size_t{1} << f.parents.size();
    if (bits.size() != expected) {
      fail("truth table length " + std::to_string(bits.size()) + " does not match " +
           std::to_string(f.parents.size()) + " parents (expected " + std::to_string(expected) +
           ")");
    }
    f.truth_table.reserve(bits.size());
    for (char c : bits) {
      if (c != '0' && c != '1') fail("truth table must contain only 0 and 1");
      f.truth_table.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return f;
  }

  std::istream& in_;
  std::string buffer_;
  std::size_t line_no_ = 0;
  std::vector<std::size_t> node_lines_;
};


void format_double(std::ostream& out, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out << buf;
}

}  // namespace

PbnModel::PbnModel(std::vector<NodeSpec> nodes, double perturbation)
    : nodes_(std::move(nodes)), perturbation_(perturbation) {
  if (nodes_.empty()) throw ModelError("model has no nodes");
  if (!(perturbation_ == 0.0 || (perturbation_ > 0.0 && perturbation_ < 1.0))) {
    throw ModelError("perturbation must lie in (0,1) or be exactly 0");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    validate_node(nodes_[i], nodes_.size(), i);
    const auto& node = nodes_[i];
    if (!node.name.empty()) {
      for (std::size_t k = 0; k < i; ++k) {
        if (nodes_[k].name == node.name) {
          throw ModelError("duplicate node name '" + node.name + "'");
        }
      }
    }
  }
}

std::optional<NodeIndex> PbnModel::find_node(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].name.empty() && nodes_[i].name == name) return static_cast<NodeIndex>(i);
  }
  return std::nullopt;
}

std::uint64_t PbnModel::realization_count() const noexcept {
  std::uint64_t total = 1;
  for (const auto& node : nodes_) {
    const std::uint64_t l = node.functions.size();
    if (total > std::numeric_limits<std::uint64_t>::max() / l) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= l;
  }
  return total;
}

PbnModel parse_model(std::istream& in) { return Parser(in).parse(); }

PbnModel parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_model(in);
}

PbnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  return parse_model(in);
}

void serialize_model(const PbnModel& model, std::ostream& out) {
  out << "pbn 1\n";
  out << "nodes " << model.node_count() << "\n";
  out << "perturbation ";
  format_double(out, model.perturbation());
  out << "\n";
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    const auto& node = model.nodes()[i];
    out << "node " << i;
    if (!node.name.empty()) out << ' ' << node.name;
    out << '\n';
    for (const auto& f : node.functions) {
      out << "func ";
      format_double(out, f.selection_prob);
      out << " : ";
      if (f.parents.empty()) {
        out << '-';
      } else {
        for (std::size_t k = 0; k < f.parents.size(); ++k) {
          if (k) out << ',';
          out << f.parents[k];
        }
      }
      out << " : ";
      for (auto bit : f.truth_table) out << static_cast<char>('0' + bit);
      out << '\n';
    }
  }
  out << "end\n";
}

std::string serialize_model(const PbnModel& model) {
  std::ostringstream out;
  serialize_model(model, out);
  return out.str();
}

double density(const PbnModel& model) {
  std::size_t total = 0;
  for (const auto& node : model.nodes()) {
    for (const auto& f : node.functions) total += f.parents.size();
  }
  return static_cast<double>(total) / static_cast<double>(model.node_count());
}

PbnModel generate_random(const GeneratorSpec& spec) {
  if (spec.node_count == 0) throw ModelError("generator: node_count must be positive");
  if (spec.min_funcs < 1 || spec.min_funcs > spec.max_funcs) {
    throw ModelError("generator: require 1 <= min_funcs <= max_funcs");
  }
  if (spec.min_parents > spec.max_parents || spec.max_parents > spec.node_count) {
    throw ModelError("generator: require min_parents <= max_parents <= node_count");
  }
  if (spec.max_parents > kMaxParents) {
    throw ModelError("generator: max_parents exceeds " + std::to_string(kMaxParents));
  }

  Rng rng(spec.seed);
  const std::size_t n = spec.node_count;
  std::vector<NodeSpec> nodes(n);
  for (auto& node : nodes) {
    const auto l = uniform_between(rng, spec.min_funcs, spec.max_funcs);
    node.functions.resize(l);
    double weight_sum = 0.0;
    for (auto& f : node.functions) {
      const auto m = uniform_between(rng, spec.min_parents, spec.max_parents);
      // Floyd's sampling of m distinct indices from [0, n).
      f.parents.reserve(m);
      for (std::size_t j = n - m; j < n; ++j) {
        const auto t = static_cast<NodeIndex>(uniform_below(rng, j + 1));
        const bool seen = std::find(f.parents.begin(), f.parents.end(), t) != f.parents.end();
        f.parents.push_back(seen ? static_cast<NodeIndex>(j) : t);
      }
      const std::size_t entries = std::size_t{1} << m;
      f.truth_table.resize(entries);
      std::uint64_t word = 0;
      for (std::size_t b = 0; b < entries; ++b) {
        if (b % 64 == 0) word = rng();
        f.truth_table[b] = static_cast<std::uint8_t>((word >> (b % 64)) & 1u);
      }
      f.selection_prob = uniform_open01(rng);
      weight_sum += f.selection_prob;
    }
    for (auto& f : node.functions) f.selection_prob /= weight_sum;
    if (l == 1) node.functions[0].selection_prob = 1.0;
  }
  return PbnModel(std::move(nodes), spec.perturbation);
}

PbnModel perturb_selection_prob(const PbnModel& model, NodeIndex node, std::size_t func,
                                double new_p) {
  if (node >= model.node_count()) throw ModelError("node index out of range");
  const auto& functions = model.node(node).functions;
  if (func >= functions.size()) throw ModelError("function index out of range");
  if (!(new_p >= 0.0 && new_p <= 1.0)) throw ModelError("new selection probability outside [0,1]");

  const double old_p = functions[func].selection_prob;
  if (new_p == old_p) return model;

  double rest = 0.0;
  for (std::size_t k = 0; k < functions.size(); ++k) {
    if (k != func) rest += functions[k].selection_prob;
  }
  if (functions.size() == 1 || rest <= 0.0) {
    throw ModelError("no mass to redistribute: node " + std::to_string(node) +
                     " has no other function with positive selection probability");
  }

  std::vector<NodeSpec> nodes(model.nodes().begin(), model.nodes().end());
  auto& target = nodes[node].functions;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (k == func) {
      target[k].selection_prob = new_p;
      continue;
    }
    const double c = target[k].selection_prob;
    const double updated = c + (old_p - new_p) * c / rest;
    if (updated < 0.0) {
      throw ModelError("perturbation produced a negative selection probability");
    }
    target[k].selection_prob = std::min(updated, 1.0);
  }
  return PbnModel(std::move(nodes), model.perturbation());
}

PbnModel force_node_constant(const PbnModel& model, NodeIndex node, bool value) {
  if (node >= model.node_count()) throw ModelError("node index out of range");
  std::vector<NodeSpec> nodes(model.nodes().begin(), model.nodes().end());
  PredictorFunction constant;
  constant.truth_table = {static_cast<std::uint8_t>(value ? 1 : 0)};
  constant.selection_prob = 1.0;
  nodes[node].functions = {std::move(constant)};
  return PbnModel(std::move(nodes), model.perturbation());
}

}  // namespace pbn
