#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "patvar/time_series.hpp"

namespace patvar {

inline constexpr int kMinOrder = 2;
inline constexpr int kMaxOrder = 10;

// n! for 0 <= n <= 20.
std::uint64_t factorial(int n);

// Lexicographic rank of a window's ordinal pattern among all permutations of
// (1..n). (1,2,..,n) is 0 and (n,..,2,1) is n!-1.
struct PatternIndex {
  int order = 0;
  std::uint32_t index = 0;

  friend bool operator==(const PatternIndex&, const PatternIndex&) = default;
};

// Ties are broken in favour of the earlier sample: equal values receive
// increasing ranks in index order.
struct StableRank {};

// Windows containing at least one pair of equal values are not counted.
struct SkipWindow {};

// Ties are broken by a seeded pseudo-random offset per sample, bounded by
// amplitude. Distinct values are never reordered, so on tie-free input this
// agrees with StableRank. The offset depends on the sample's position in the
// series, so overlapping windows see consistent perturbations.
struct Jitter {
  std::uint64_t seed = 0;
  double amplitude = 0.0;
};

using TiePolicy = std::variant<StableRank, SkipWindow, Jitter>;

std::string describe(const TiePolicy& policy);

// Jitter amplitude must be > 0 and >= 2^-40 * (max - min) of the series it
// is applied to. A constant series has range 0, so any positive amplitude is
// accepted there.
void validate_policy(const TiePolicy& policy, std::span<const double> values);

// Default jitter amplitude for a series: 2^-40 * range, or 2^-40 for a
// constant series.
double default_jitter_amplitude(std::span<const double> values);

// Deterministic offset in [-amplitude/2, amplitude/2) for the sample at
// `position`.
double jitter_offset(const Jitter& jitter, std::size_t position);

// Encodes one window. Returns nullopt only under SkipWindow when the window
// contains a tie. `position` is the series index of window[0]; it only
// matters for Jitter.
std::optional<PatternIndex> encode_pattern(std::span<const double> window,
                                           const TiePolicy& policy,
                                           std::size_t position = 0);

// Rank vector (1-based) of a pattern index.
std::vector<int> decode_pattern(PatternIndex pattern);

// Rank vector assigned to a window under the policy (ties resolved). Intended
// for debugging and tests; the histogram path never materialises it.
std::vector<int> rank_vector(std::span<const double> window, const TiePolicy& policy,
                             std::size_t position = 0);

struct PatternHistogram {
  int order = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t total_windows = 0;
  std::uint64_t tie_windows = 0;
  // Windows dropped under SkipWindow; not part of total_windows.
  std::uint64_t skipped_windows = 0;

  static PatternHistogram empty(int order);

  double probability(std::size_t index) const;

  // Adds another histogram of the same order, e.g. from a disjoint range of
  // windows or a different series segment.
  PatternHistogram& operator+=(const PatternHistogram& other);

  friend bool operator==(const PatternHistogram&, const PatternHistogram&) = default;
};

// Histogram over all N-n+1 overlapping windows of the series.
PatternHistogram pattern_histogram(const TimeSeries& series, int order,
                                   const TiePolicy& policy = StableRank{});

PatternHistogram pattern_histogram(std::span<const double> values, int order,
                                   const TiePolicy& policy = StableRank{});

// Histogram over the windows whose first sample lies in
// [first_window, last_window). Summing the histograms of a partition of
// [0, N-n+1) reproduces pattern_histogram exactly.
PatternHistogram pattern_histogram_range(std::span<const double> values, int order,
                                         const TiePolicy& policy, std::size_t first_window,
                                         std::size_t last_window);

// Accumulates the windows of `values` into `hist`. `base_position` is the
// series index of values[0], used to seed jitter offsets.
void accumulate_patterns(std::span<const double> values, const TiePolicy& policy,
                         std::size_t base_position, PatternHistogram& hist);

struct EntropyReport {
  int order = 0;
  double entropy_nats = 0.0;   // H_n, natural log
  double per_symbol = 0.0;     // H_n / (n - 1)
  double normalized = 0.0;     // H_n / ln(n!)
  std::uint64_t total_windows = 0;
  double tie_fraction = 0.0;   // tie_windows / (total_windows + skipped_windows)
};

EntropyReport entropy(const PatternHistogram& hist);

TimeSeries first_difference(const TimeSeries& series);

// Keeps samples 0, k, 2k, ...
TimeSeries subsample(const TimeSeries& series, int k);

}  // namespace patvar
