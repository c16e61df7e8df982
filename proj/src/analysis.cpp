#include "patvar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "patvar/error.hpp"
#include "patvar/rng.hpp"

namespace patvar {

namespace {

unsigned resolve_workers(Parallelism par, std::size_t tasks) {
  unsigned w = par.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : par.workers;
  if (tasks < w) w = static_cast<unsigned>(std::max<std::size_t>(tasks, 1));
  return w;
}

// Runs fn(i) for i in [0, count). Each index is handled by exactly one worker;
// callers write to slot i only, so results are independent of the split.
template <typename Fn>
void parallel_for(std::size_t count, Parallelism par, Fn&& fn) {
  const unsigned workers = resolve_workers(par, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  threads.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_profile_orders(int n_min, int n_max) {
  if (n_min < kMinOrder || n_max > kMaxOrder || n_min > n_max) {
    throw Error(ErrorKind::kUnsupportedOrder,
                fmt::format("order range [{}, {}] outside [{}, {}] or empty", n_min, n_max,
                            kMinOrder, kMaxOrder));
  }
}

}  // namespace

std::string_view to_string(NullStatistic statistic) {
  return statistic == NullStatistic::kNormalized ? "normalized" : "per_symbol";
}

NullStatistic parse_null_statistic(std::string_view text) {
  if (text == "normalized") return NullStatistic::kNormalized;
  if (text == "per_symbol" || text == "per-symbol") return NullStatistic::kPerSymbol;
  throw Error(ErrorKind::kParameter, fmt::format("unknown null statistic '{}'", text));
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kRandomWalk: return "random-walk";
    case SyntheticKind::kIIDNoise: return "iid-noise";
    case SyntheticKind::kMonotoneRamp: return "ramp";
    case SyntheticKind::kQuantizedWalk: return "quantized-walk";
  }
  return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
  for (auto k : {SyntheticKind::kRandomWalk, SyntheticKind::kIIDNoise,
                 SyntheticKind::kMonotoneRamp, SyntheticKind::kQuantizedWalk}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorKind::kInvalidSpec, fmt::format("unknown synthetic kind '{}'", text));
}

std::vector<EntropyReport> entropy_profile(const TimeSeries& series, int n_min, int n_max,
                                           const TiePolicy& policy) {
  check_profile_orders(n_min, n_max);
  if (series.size() < static_cast<std::size_t>(n_max)) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("series of length {} is shorter than order {}", series.size(), n_max));
  }
  std::vector<EntropyReport> out;
  out.reserve(static_cast<std::size_t>(n_max - n_min + 1));
  for (int n = n_min; n <= n_max; ++n) out.push_back(entropy(pattern_histogram(series, n, policy)));
  return out;
}

std::vector<EntropyReport> entropy_profile(const std::vector<TimeSeries>& segments, int n_min,
                                           int n_max, const TiePolicy& policy) {
  check_profile_orders(n_min, n_max);
  std::size_t longest = 0;
  for (const auto& segment : segments) {
    segment.validate();
    validate_policy(policy, segment.view());
    longest = std::max(longest, segment.size());
  }
  if (longest < static_cast<std::size_t>(n_max)) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("longest segment has {} samples, fewer than order {}", longest, n_max));
  }
  std::vector<EntropyReport> out;
  for (int n = n_min; n <= n_max; ++n) {
    auto hist = PatternHistogram::empty(n);
    std::size_t base = 0;
    for (const auto& segment : segments) {
      accumulate_patterns(segment.view(), policy, base, hist);
      base += segment.size();
    }
    out.push_back(entropy(hist));
  }
  return out;
}

LinearFit estimate_k(const std::vector<EntropyReport>& profile) {
  if (profile.size() < 2) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("slope estimate needs at least 2 orders, got {}", profile.size()));
  }
  LinearFit fit;
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& r : profile) {
    if (std::find(fit.orders_used.begin(), fit.orders_used.end(), r.order) ==
        fit.orders_used.end()) {
      fit.orders_used.push_back(r.order);
    }
    mean_x += r.order - 1;
    mean_y += r.entropy_nats;
  }
  if (fit.orders_used.size() < 2) {
    throw Error(ErrorKind::kInsufficientData, "slope estimate needs at least 2 distinct orders");
  }
  const double m = static_cast<double>(profile.size());
  mean_x /= m;
  mean_y /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& r : profile) {
    const double dx = (r.order - 1) - mean_x;
    sxx += dx * dx;
    sxy += dx * (r.entropy_nats - mean_y);
  }
  fit.k_slope = sxy / sxx;
  fit.intercept_C = mean_y - fit.k_slope * mean_x;
  for (const auto& r : profile) {
    const double predicted = fit.k_slope * (r.order - 1) + fit.intercept_C;
    fit.max_residual = std::max(fit.max_residual, std::abs(r.entropy_nats - predicted));
  }
  return fit;
}

std::size_t scan_point_count(std::size_t series_len, std::size_t window_len, std::size_t step) {
  if (step == 0 || window_len == 0 || series_len < window_len) return 0;
  return (series_len - window_len) / step + 1;
}

std::vector<ScanPoint> sliding_scan(const TimeSeries& series, const ScanConfig& cfg,
                                    Parallelism par) {
  if (cfg.order < kMinOrder || cfg.order > kMaxOrder) {
    throw Error(ErrorKind::kUnsupportedOrder,
                fmt::format("order {} outside supported range [{}, {}]", cfg.order, kMinOrder,
                            kMaxOrder));
  }
  if (cfg.step < 1) throw Error(ErrorKind::kParameter, "scan step must be at least 1");
  if (cfg.window_len < static_cast<std::size_t>(cfg.order)) {
    throw Error(ErrorKind::kParameter,
                fmt::format("window length {} is shorter than order {}", cfg.window_len,
                            cfg.order));
  }
  if (series.size() < cfg.window_len) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("series of length {} is shorter than the scan window {}",
                            series.size(), cfg.window_len));
  }
  series.validate();
  validate_policy(cfg.tie_policy, series.view());

  const std::size_t count = scan_point_count(series.size(), cfg.window_len, cfg.step);
  std::vector<ScanPoint> points(count);
  const auto values = series.view();
  parallel_for(count, par, [&](std::size_t i) {
    const std::size_t start = i * cfg.step;
    auto hist = PatternHistogram::empty(cfg.order);
    accumulate_patterns(values.subspan(start, cfg.window_len), cfg.tie_policy, start, hist);
    ScanPoint& p = points[i];
    p.start_index = start;
    if (series.timestamps) p.timestamp = (*series.timestamps)[start];
    p.report = entropy(hist);
  });
  return points;
}

TimeSeries scale_series(const TimeSeries& series, int scale, bool difference,
                        DifferenceOrder order) {
  if (!difference) return subsample(series, scale);
  if (order == DifferenceOrder::kSubsampleThenDifference) {
    return first_difference(subsample(series, scale));
  }
  return subsample(first_difference(series), scale);
}

std::vector<ScaleRow> multiscale_table(const TimeSeries& series, const MultiscaleConfig& cfg) {
  return multiscale_table(std::vector<TimeSeries>{series}, cfg);
}

std::vector<ScaleRow> multiscale_table(const std::vector<TimeSeries>& segments,
                                       const MultiscaleConfig& cfg) {
  if (cfg.scales.empty()) throw Error(ErrorKind::kInvalidScale, "no scales given");
  if (cfg.order < kMinOrder || cfg.order > kMaxOrder) {
    throw Error(ErrorKind::kUnsupportedOrder,
                fmt::format("order {} outside supported range [{}, {}]", cfg.order, kMinOrder,
                            kMaxOrder));
  }
  for (int k : cfg.scales) {
    if (k < 1) throw Error(ErrorKind::kInvalidScale, fmt::format("scale {} is below 1", k));
  }
  const auto n = static_cast<std::size_t>(cfg.order);
  std::vector<ScaleRow> rows;
  rows.reserve(cfg.scales.size());
  for (int k : cfg.scales) {
    auto hist = PatternHistogram::empty(cfg.order);
    std::size_t longest = 0;
    for (const auto& segment : segments) {
      const std::size_t kept = (segment.size() + static_cast<std::size_t>(k) - 1) /
                               static_cast<std::size_t>(k);
      if (cfg.difference_first && (segment.size() < 2 || kept < 2)) continue;
      const TimeSeries scaled =
          scale_series(segment, k, cfg.difference_first, cfg.difference_order);
      longest = std::max(longest, scaled.size());
      if (scaled.size() < n) continue;
      validate_policy(cfg.tie_policy, scaled.view());
      accumulate_patterns(scaled.view(), cfg.tie_policy, 0, hist);
    }
    if (longest < n) {
      throw Error(ErrorKind::kInsufficientData,
                  fmt::format("scale {} leaves {} points, fewer than order {}", k, longest, n));
    }
    rows.push_back(ScaleRow{k, entropy(hist)});
  }
  return rows;
}

TimeSeries generate(const SyntheticSpec& spec) {
  if (spec.length < 2) {
    throw Error(ErrorKind::kInvalidSpec,
                fmt::format("synthetic length {} is below 2", spec.length));
  }
  if (spec.kind == SyntheticKind::kQuantizedWalk &&
      !(spec.tick_size > 0.0 && std::isfinite(spec.tick_size))) {
    throw Error(ErrorKind::kInvalidSpec, "tick size must be positive and finite");
  }
  TimeSeries out;
  out.values.resize(spec.length);
  std::mt19937_64 engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (spec.kind) {
    case SyntheticKind::kMonotoneRamp:
      for (std::size_t i = 0; i < spec.length; ++i) out.values[i] = static_cast<double>(i);
      break;
    case SyntheticKind::kIIDNoise:
      for (auto& v : out.values) v = normal(engine);
      break;
    case SyntheticKind::kRandomWalk:
    case SyntheticKind::kQuantizedWalk: {
      double x = 0.0;
      out.values[0] = 0.0;
      for (std::size_t i = 1; i < spec.length; ++i) {
        x += normal(engine);
        out.values[i] = x;
      }
      if (spec.kind == SyntheticKind::kQuantizedWalk) {
        for (auto& v : out.values) v = std::round(v / spec.tick_size) * spec.tick_size;
      }
      break;
    }
  }
  return out;
}

double normalized_bias(int order, double windows) {
  const double states = static_cast<double>(factorial(order));
  return (states - 1.0) / (2.0 * windows * std::log(states));
}

NullCalibration calibrate_null(const NullConfig& cfg, Parallelism par) {
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) {
    throw Error(ErrorKind::kParameter,
                fmt::format("confidence {} must lie strictly between 0 and 1", cfg.confidence));
  }
  if (cfg.trials < 100) {
    throw Error(ErrorKind::kParameter, fmt::format("need at least 100 trials, got {}", cfg.trials));
  }
  if (cfg.order < kMinOrder || cfg.order > kMaxOrder) {
    throw Error(ErrorKind::kUnsupportedOrder,
                fmt::format("order {} outside supported range [{}, {}]", cfg.order, kMinOrder,
                            kMaxOrder));
  }
  const std::size_t needed = static_cast<std::size_t>(cfg.order) + (cfg.difference ? 1 : 0);
  if (cfg.series_len < needed) {
    throw Error(ErrorKind::kInsufficientData,
                fmt::format("series length {} too short for order {}", cfg.series_len, cfg.order));
  }

  std::vector<double> stats(cfg.trials);
  parallel_for(cfg.trials, par, [&](std::size_t trial) {
    SyntheticSpec spec{SyntheticKind::kRandomWalk, cfg.series_len, derive_seed(cfg.seed, trial)};
    TimeSeries walk = generate(spec);
    if (cfg.difference) walk = first_difference(walk);
    const EntropyReport r = entropy(pattern_histogram(walk, cfg.order, StableRank{}));
    stats[trial] = cfg.statistic == NullStatistic::kNormalized ? r.normalized : r.per_symbol;
  });
  std::sort(stats.begin(), stats.end());

  // Largest order statistic that at least `confidence` of the trials reach.
  const auto t = static_cast<double>(cfg.trials);
  const auto at_least = static_cast<std::size_t>(std::ceil(cfg.confidence * t - 1e-9));
  const std::size_t idx = cfg.trials - std::max<std::size_t>(at_least, 1);

  NullCalibration out;
  out.series_len = cfg.series_len;
  out.order = cfg.order;
  out.trials = cfg.trials;
  out.confidence = cfg.confidence;
  out.critical_value = stats[idx];
  out.seed = cfg.seed;
  out.statistic = cfg.statistic;
  out.difference = cfg.difference;
  out.sorted_statistics = std::move(stats);
  return out;
}

}  // namespace patvar
