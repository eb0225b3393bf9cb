#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "asal/data.hpp"
#include "asal/matrix.hpp"

namespace asal {

/// Label source for the active-learning loop. A nullopt label means the
/// oracle skipped (or refused) that sample.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::vector<std::optional<int>> label_pool(const Pool& pool,
                                                     std::span<const std::size_t> indices,
                                                     std::size_t cycle) = 0;
  virtual std::vector<std::optional<int>> label_synthetic(const Matrix& samples,
                                                          std::size_t cycle) = 0;
};

/// Answers from the hidden pool labels; synthetic samples go to the dataset's
/// ground-truth labeler and are refused when there is none.
class SimulatedOracle final : public Oracle {
 public:
  explicit SimulatedOracle(LabelFunction labeler = {}) : labeler_(std::move(labeler)) {}

  std::vector<std::optional<int>> label_pool(const Pool& pool, std::span<const std::size_t> indices,
                                             std::size_t cycle) override;
  std::vector<std::optional<int>> label_synthetic(const Matrix& samples, std::size_t cycle) override;

 private:
  LabelFunction labeler_;
};

}  // namespace asal
