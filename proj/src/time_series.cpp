#include "patvar/time_series.hpp"

#include <cmath>

#include <fmt/format.h>

#include "patvar/error.hpp"

namespace patvar {

TimeSeries TimeSeries::make(std::vector<double> values,
                            std::optional<std::vector<std::int64_t>> timestamps) {
  TimeSeries s{std::move(values), std::move(timestamps)};
  s.validate();
  return s;
}

void TimeSeries::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::kInvalidInput, fmt::format("non-finite value at index {}", i));
    }
  }
  if (!timestamps) return;
  if (timestamps->size() != values.size()) {
    throw Error(ErrorKind::kInvalidInput,
                fmt::format("{} timestamps for {} values", timestamps->size(), values.size()));
  }
  for (std::size_t i = 1; i < timestamps->size(); ++i) {
    if ((*timestamps)[i] < (*timestamps)[i - 1]) {
      throw Error(ErrorKind::kInvalidInput, fmt::format("timestamp decreases at index {}", i));
    }
  }
}

}  // namespace patvar
