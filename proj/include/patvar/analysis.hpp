#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "patvar/ordinal.hpp"
#include "patvar/time_series.hpp"

namespace patvar {

// Worker count 0 means "use hardware concurrency". Results never depend on it.
struct Parallelism {
  unsigned workers = 1;
};

struct ScanConfig {
  int order = 7;
  std::size_t window_len = 10000;
  std::size_t step = 2000;
  TiePolicy tie_policy = StableRank{};
};

struct ScanPoint {
  std::size_t start_index = 0;
  std::optional<std::int64_t> timestamp;
  EntropyReport report;
};

struct LinearFit {
  double k_slope = 0.0;
  double intercept_C = 0.0;
  std::vector<int> orders_used;
  double max_residual = 0.0;
};

enum class NullStatistic { kNormalized, kPerSymbol };

std::string_view to_string(NullStatistic statistic);
NullStatistic parse_null_statistic(std::string_view text);

struct NullConfig {
  std::size_t series_len = 0;
  int order = 7;
  std::size_t trials = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
  NullStatistic statistic = NullStatistic::kNormalized;
  // Evaluate the statistic on the first difference of each random walk.
  bool difference = true;
};

struct NullCalibration {
  std::size_t series_len = 0;
  int order = 0;
  std::size_t trials = 0;
  double confidence = 0.0;
  double critical_value = 0.0;
  std::uint64_t seed = 0;
  NullStatistic statistic = NullStatistic::kNormalized;
  bool difference = true;
  // Trial statistics, ascending.
  std::vector<double> sorted_statistics;
};

enum class SyntheticKind { kRandomWalk, kIIDNoise, kMonotoneRamp, kQuantizedWalk };

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view text);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kRandomWalk;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  // Only used by kQuantizedWalk.
  double tick_size = 1.0;
};

// Applied at each scale of multiscale_table.
enum class DifferenceOrder {
  kSubsampleThenDifference,  // k-tick increments
  kDifferenceThenSubsample,  // every k-th single-tick increment
};

struct MultiscaleConfig {
  int order = 7;
  std::vector<int> scales{1, 2, 4, 8, 32, 128};
  bool difference_first = true;
  DifferenceOrder difference_order = DifferenceOrder::kSubsampleThenDifference;
  TiePolicy tie_policy = StableRank{};
};

struct ScaleRow {
  int scale = 1;
  EntropyReport report;
};

std::vector<EntropyReport> entropy_profile(const TimeSeries& series, int n_min, int n_max,
                                           const TiePolicy& policy = StableRank{});

// Profile with each order's histogram summed over independent segments.
// Segments shorter than an order contribute no windows to it.
std::vector<EntropyReport> entropy_profile(const std::vector<TimeSeries>& segments, int n_min,
                                           int n_max, const TiePolicy& policy = StableRank{});

// Unweighted least squares of H_n against n - 1.
LinearFit estimate_k(const std::vector<EntropyReport>& profile);

std::size_t scan_point_count(std::size_t series_len, std::size_t window_len, std::size_t step);

std::vector<ScanPoint> sliding_scan(const TimeSeries& series, const ScanConfig& cfg,
                                    Parallelism par = {});

// Transforms the series as multiscale_table does at one scale.
TimeSeries scale_series(const TimeSeries& series, int scale, bool difference,
                        DifferenceOrder order);

std::vector<ScaleRow> multiscale_table(const TimeSeries& series, const MultiscaleConfig& cfg);

// Same table, with each scale's histogram summed over independent segments
// (windows never span two segments).
std::vector<ScaleRow> multiscale_table(const std::vector<TimeSeries>& segments,
                                       const MultiscaleConfig& cfg);

TimeSeries generate(const SyntheticSpec& spec);

NullCalibration calibrate_null(const NullConfig& cfg, Parallelism par = {});

// First-order estimate of the entropy deficit of a uniform pattern law
// observed through `windows` windows, in units of ln(n!):
// (n! - 1) / (2 * windows * ln(n!)).
double normalized_bias(int order, double windows);

}  // namespace patvar
