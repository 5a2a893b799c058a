#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pbn {

/// Packed assignment of one bit per node; node i lives at bit i % 64 of word i / 64.
class NetworkState {
 public:
  NetworkState() = default;
  explicit NetworkState(std::size_t node_count)
      : words_((node_count + 63) / 64, 0), size_(node_count) {}

  /// State whose node i equals bit i of `index` (node 0 least significant). size <= 64.
  static NetworkState from_index(std::uint64_t index, std::size_t node_count) {
    NetworkState s(node_count);
    if (node_count > 0) {
      s.words_[0] = node_count >= 64 ? index : index & ((std::uint64_t{1} << node_count) - 1);
    }
    return s;
  }

  std::size_t size() const noexcept { return size_; }

  bool get(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  bool operator[](std::size_t i) const noexcept { return get(i); }

  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    words_[i >> 6] = value ? (words_[i >> 6] | mask) : (words_[i >> 6] & ~mask);
  }
  void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  /// Node 0 as least significant bit. Only meaningful for size() <= 64.
  std::uint64_t to_index() const noexcept { return words_.empty() ? 0 : words_[0]; }

  std::size_t count_ones() const noexcept {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  std::span<std::uint64_t> words() noexcept { return words_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  /// Node values as '0'/'1' characters, node 0 first.
  std::string to_string() const {
    std::string out(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) out[i] = get(i) ? '1' : '0';
    return out;
  }

  friend bool operator==(const NetworkState&, const NetworkState&) = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

}  // namespace pbn
