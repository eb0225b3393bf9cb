#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace asal {

/// Marks pool indices that may no longer be returned (already labeled or
/// already chosen in the current round).
class QueryMask {
 public:
  QueryMask() = default;
  explicit QueryMask(std::size_t size) : bits_(size, 0) {}

  std::size_t size() const { return bits_.size(); }
  std::size_t masked_count() const { return masked_; }
  std::size_t unmasked_count() const { return bits_.size() - masked_; }

  bool masked(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i) {
    if (!bits_[i]) {
      bits_[i] = 1;
      ++masked_;
    }
  }
  void clear(std::size_t i) {
    if (bits_[i]) {
      bits_[i] = 0;
      --masked_;
    }
  }
  void set_all(std::span<const std::size_t> indices) {
    for (auto i : indices) set(i);
  }

  std::vector<std::size_t> unmasked_indices() const;

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t masked_ = 0;
};

inline std::vector<std::size_t> QueryMask::unmasked_indices() const {
  std::vector<std::size_t> out;
  out.reserve(unmasked_count());
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (!bits_[i]) out.push_back(i);
  return out;
}

}  // namespace asal
