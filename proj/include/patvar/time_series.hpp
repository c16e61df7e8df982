#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace patvar {

// Ordered real-valued samples with optional epoch-millisecond timestamps.
// Construct through make() to have the invariants checked.
struct TimeSeries {
  std::vector<double> values;
  std::optional<std::vector<std::int64_t>> timestamps;

  // Throws Error(kInvalidInput) on non-finite values, a timestamp vector of
  // the wrong length, or decreasing timestamps.
  static TimeSeries make(std::vector<double> values,
                         std::optional<std::vector<std::int64_t>> timestamps = std::nullopt);

  void validate() const;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  std::span<const double> view() const noexcept { return values; }
};

}  // namespace patvar
