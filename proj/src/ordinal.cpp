#include "patvar/ordinal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "patvar/error.hpp"
#include "patvar/rng.hpp"

namespace patvar {

namespace {

constexpr std::array<std::uint32_t, kMaxOrder + 1> kFactorials = [] {
  std::array<std::uint32_t, kMaxOrder + 1> f{};
  f[0] = 1;
  for (int i = 1; i <= kMaxOrder; ++i) f[i] = f[i - 1] * static_cast<std::uint32_t>(i);
  return f;
}();

void check_order(int order) {
  if (order < kMinOrder || order > kMaxOrder) {
    throw Error(ErrorKind::kUnsupportedOrder,
                fmt::format("order {} outside supported range [{}, {}]", order, kMinOrder,
                            kMaxOrder));
  }
}

void check_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::kInvalidInput, fmt::format("non-finite value at index {}", i));
    }
  }
}

// Lehmer digit j is the number of later samples that rank below sample j;
// the weighted digit sum is the lexicographic rank of the rank vector.
struct StableLess {
  bool has_tie = false;
  // Later sample k < earlier sample j. Equal values rank the earlier one lower.
  bool operator()(double later, double earlier, std::size_t, std::size_t) {
    if (later == earlier) has_tie = true;
    return later < earlier;
  }
};

struct JitterLess {
  const std::uint64_t* keys;
  bool has_tie = false;
  bool operator()(double later, double earlier, std::size_t k, std::size_t j) {
    if (later == earlier) {
      has_tie = true;
      if (keys[k] != keys[j]) return keys[k] < keys[j];
      return false;
    }
    return later < earlier;
  }
};

template <typename Less>
std::uint32_t lehmer_rank(const double* w, int n, Less& less) {
  std::uint32_t index = 0;
  for (int j = 0; j < n - 1; ++j) {
    std::uint32_t smaller_later = 0;
    const double xj = w[j];
    for (int k = j + 1; k < n; ++k) {
      smaller_later += less(w[k], xj, static_cast<std::size_t>(k), static_cast<std::size_t>(j));
    }
    index += smaller_later * kFactorials[n - 1 - j];
  }
  return index;
}

std::uint64_t jitter_key(std::uint64_t seed, std::size_t position) {
  return SplitMix64::mix(seed ^ SplitMix64::mix(static_cast<std::uint64_t>(position) + 1));
}

void accumulate_stable(std::span<const double> v, bool skip_ties, PatternHistogram& hist) {
  const int n = hist.order;
  const std::size_t windows = v.size() - static_cast<std::size_t>(n) + 1;
  std::uint64_t* counts = hist.counts.data();
  for (std::size_t s = 0; s < windows; ++s) {
    StableLess less;
    const std::uint32_t index = lehmer_rank(v.data() + s, n, less);
    if (less.has_tie) {
      ++hist.tie_windows;
      if (skip_ties) {
        ++hist.skipped_windows;
        continue;
      }
    }
    ++counts[index];
    ++hist.total_windows;
  }
}

void accumulate_jitter(std::span<const double> v, const Jitter& jitter, std::size_t base,
                       PatternHistogram& hist) {
  const int n = hist.order;
  const std::size_t windows = v.size() - static_cast<std::size_t>(n) + 1;
  // Ring of keys for the current window; keys[k] belongs to sample s + k.
  std::array<std::uint64_t, 2 * kMaxOrder> ring{};
  for (int k = 0; k < n; ++k) ring[k] = jitter_key(jitter.seed, base + k);
  std::array<std::uint64_t, kMaxOrder> keys{};
  for (std::size_t s = 0; s < windows; ++s) {
    for (int k = 0; k < n; ++k) keys[k] = ring[(s + k) % (2 * kMaxOrder)];
    JitterLess less{keys.data()};
    const std::uint32_t index = lehmer_rank(v.data() + s, n, less);
    if (less.has_tie) ++hist.tie_windows;
    ++hist.counts[index];
    ++hist.total_windows;
    if (s + 1 < windows) {
      ring[(s + n) % (2 * kMaxOrder)] = jitter_key(jitter.seed, base + s + n);
    }
  }
}

}  // namespace

std::uint64_t factorial(int n) {
  if (n < 0 || n > 20) throw Error(ErrorKind::kParameter, fmt::format("factorial({})", n));
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

std::string describe(const TiePolicy& policy) {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, StableRank>) {
          return "stable";
        } else if constexpr (std::is_same_v<P, SkipWindow>) {
          return "skip";
        } else {
          return fmt::format("jitter(seed={}, amplitude={:.17g})", p.seed, p.amplitude);
        }
      },
      policy);
}

double default_jitter_amplitude(std::span<const double> values) {
  if (values.empty()) return std::ldexp(1.0, -40);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  return range > 0.0 ? std::ldexp(range, -40) : std::ldexp(1.0, -40);
}

void validate_policy(const TiePolicy& policy, std::span<const double> values) {
  const auto* jitter = std::get_if<Jitter>(&policy);
  if (jitter == nullptr) return;
  if (!(jitter->amplitude > 0.0) || !std::isfinite(jitter->amplitude)) {
    throw Error(ErrorKind::kParameter, "jitter amplitude must be positive and finite");
  }
  if (values.empty()) return;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double floor = std::ldexp(*hi - *lo, -40);
  if (jitter->amplitude < floor) {
    throw Error(ErrorKind::kParameter,
                fmt::format("jitter amplitude {:.6g} is below 2^-40 of the value range ({:.6g})",
                            jitter->amplitude, floor));
  }
}

double jitter_offset(const Jitter& jitter, std::size_t position) {
  const double unit = static_cast<double>(jitter_key(jitter.seed, position) >> 11) * 0x1.0p-53;
  return jitter.amplitude * (unit - 0.5);
}

std::optional<PatternIndex> encode_pattern(std::span<const double> window,
                                           const TiePolicy& policy, std::size_t position) {
  const int n = static_cast<int>(window.size());
  if (n < kMinOrder) {
    throw Error(ErrorKind::kInvalidOrder, fmt::format("window length {} is below 2", n));
  }
  if (n > kMaxOrder) check_order(n);
  check_finite(window);

  if (const auto* jitter = std::get_if<Jitter>(&policy)) {
    std::array<std::uint64_t, kMaxOrder> keys{};
    for (int k = 0; k < n; ++k) keys[k] = jitter_key(jitter->seed, position + k);
    JitterLess less{keys.data()};
    return PatternIndex{n, lehmer_rank(window.data(), n, less)};
  }
  StableLess less;
  const std::uint32_t index = lehmer_rank(window.data(), n, less);
  if (less.has_tie && std::holds_alternative<SkipWindow>(policy)) return std::nullopt;
  return PatternIndex{n, index};
}

std::vector<int> decode_pattern(PatternIndex pattern) {
  check_order(pattern.order);
  const int n = pattern.order;
  if (pattern.index >= kFactorials[n]) {
    throw Error(ErrorKind::kInvalidInput,
                fmt::format("pattern index {} out of range for order {}", pattern.index, n));
  }
  std::vector<int> unused(n);
  std::iota(unused.begin(), unused.end(), 1);
  std::vector<int> ranks;
  ranks.reserve(n);
  std::uint32_t rest = pattern.index;
  for (int j = 0; j < n; ++j) {
    const std::uint32_t weight = kFactorials[n - 1 - j];
    const std::uint32_t digit = rest / weight;
    rest %= weight;
    ranks.push_back(unused[digit]);
    unused.erase(unused.begin() + digit);
  }
  return ranks;
}

std::vector<int> rank_vector(std::span<const double> window, const TiePolicy& policy,
                             std::size_t position) {
  const auto encoded = encode_pattern(window, policy, position);
  if (encoded) return decode_pattern(*encoded);
  // Skipped window: report the stable ranking so callers can still inspect it.
  return decode_pattern(*encode_pattern(window, StableRank{}, position));
}

PatternHistogram PatternHistogram::empty(int order) {
  check_order(order);
  PatternHistogram h;
  h.order = order;
  h.counts.assign(kFactorials[order], 0);
  return h;
}

double PatternHistogram::probability(std::size_t index) const {
  if (total_windows == 0) return 0.0;
  return static_cast<double>(counts.at(index)) / static_cast<double>(total_windows);
}

PatternHistogram& PatternHistogram::operator+=(const PatternHistogram& other) {
  if (other.order != order) {
    throw Error(ErrorKind::kParameter,
                fmt::format("cannot merge histograms of order {} and {}", order, other.order));
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  total_windows += other.total_windows;
  tie_windows += other.tie_windows;
  skipped_windows += other.skipped_windows;
  return *this;
}

void accumulate_patterns(std::span<const double> values, const TiePolicy& policy,
                         std::size_t base_position, PatternHistogram& hist) {
  check_order(hist.order);
  if (values.size() < static_cast<std::size_t>(hist.order)) return;
  if (const auto* jitter = std::get_if<Jitter>(&policy)) {
    accumulate_jitter(values, *jitter, base_position, hist);
  } else {
    accumulate_stable(values, std::holds_alternative<SkipWindow>(policy), hist);
  }
}

PatternHistogram pattern_histogram_range(std::span<const double> values, int order,
                                         const TiePolicy& policy, std::size_t first_window,
                                         std::size_t last_window) {
  check_order(order);
  if (values.size() < static_cast<std::size_t>(order)) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("series of length {} is shorter than order {}", values.size(), order));
  }
  const std::size_t windows = values.size() - static_cast<std::size_t>(order) + 1;
  if (first_window > last_window || last_window > windows) {
    throw Error(ErrorKind::kParameter,
                fmt::format("window range [{}, {}) outside [0, {})", first_window, last_window,
                            windows));
  }
  check_finite(values);
  validate_policy(policy, values);
  auto hist = PatternHistogram::empty(order);
  if (first_window == last_window) return hist;
  const auto part = values.subspan(first_window, last_window - first_window + order - 1);
  accumulate_patterns(part, policy, first_window, hist);
  return hist;
}

PatternHistogram pattern_histogram(std::span<const double> values, int order,
                                   const TiePolicy& policy) {
  check_order(order);
  if (values.size() < static_cast<std::size_t>(order)) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("series of length {} is shorter than order {}", values.size(), order));
  }
  return pattern_histogram_range(values, order, policy, 0,
                                 values.size() - static_cast<std::size_t>(order) + 1);
}

PatternHistogram pattern_histogram(const TimeSeries& series, int order, const TiePolicy& policy) {
  return pattern_histogram(series.view(), order, policy);
}

EntropyReport entropy(const PatternHistogram& hist) {
  check_order(hist.order);
  if (hist.total_windows == 0) {
    if (hist.skipped_windows > 0) {
      throw Error(ErrorKind::kInsufficientData,
                  fmt::format("all {} windows contain ties and were skipped",
                              hist.skipped_windows));
    }
    throw Error(ErrorKind::kInsufficientData, "empty pattern histogram");
  }
  const double total = static_cast<double>(hist.total_windows);
  double h = 0.0;
  std::uint64_t common = 0;
  std::size_t nonzero = 0;
  bool equal_counts = true;
  for (const std::uint64_t c : hist.counts) {
    if (c == 0) continue;
    if (nonzero++ == 0) common = c;
    equal_counts = equal_counts && c == common;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  // Equiprobable support: H is exactly ln(support size). Summing the terms
  // would leave a few ulps of error at the bounds.
  if (equal_counts) h = std::log(static_cast<double>(nonzero));
  const double h_max = std::log(static_cast<double>(kFactorials[hist.order]));
  h = std::clamp(h, 0.0, h_max);

  EntropyReport r;
  r.order = hist.order;
  r.entropy_nats = h;
  r.per_symbol = h / static_cast<double>(hist.order - 1);
  r.normalized = std::clamp(h / h_max, 0.0, 1.0);
  r.total_windows = hist.total_windows;
  const std::uint64_t examined = hist.total_windows + hist.skipped_windows;
  r.tie_fraction = static_cast<double>(hist.tie_windows) / static_cast<double>(examined);
  return r;
}

TimeSeries first_difference(const TimeSeries& series) {
  if (series.size() < 2) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("first difference needs at least 2 samples, got {}", series.size()));
  }
  TimeSeries out;
  out.values.resize(series.size() - 1);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    out.values[i] = series.values[i + 1] - series.values[i];
  }
  if (series.timestamps) {
    out.timestamps.emplace(series.timestamps->begin() + 1, series.timestamps->end());
  }
  return out;
}

TimeSeries subsample(const TimeSeries& series, int k) {
  if (k < 1) throw Error(ErrorKind::kInvalidScale, fmt::format("scale {} is below 1", k));
  const auto step = static_cast<std::size_t>(k);
  TimeSeries out;
  const std::size_t len = (series.size() + step - 1) / step;
  out.values.reserve(len);
  for (std::size_t i = 0; i < series.size(); i += step) out.values.push_back(series.values[i]);
  if (series.timestamps) {
    std::vector<std::int64_t> ts;
    ts.reserve(len);
    for (std::size_t i = 0; i < series.size(); i += step) ts.push_back((*series.timestamps)[i]);
    out.timestamps = std::move(ts);
  }
  return out;
}

}  // namespace patvar
