#include <doctest.h>

#include <cmath>
#include <numeric>

#include "patvar/analysis.hpp"
#include "patvar/error.hpp"

using namespace patvar;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected patvar::Error");
  return ErrorKind::kParameter;
}

EntropyReport fake_report(int order, double h) {
  EntropyReport r;
  r.order = order;
  r.entropy_nats = h;
  r.per_symbol = h / (order - 1);
  return r;
}

}  // namespace

TEST_CASE("entropy_profile") {
  const auto ramp = generate({SyntheticKind::kMonotoneRamp, 1000, 0});
  const auto profile = entropy_profile(ramp, 2, 8);
  REQUIRE(profile.size() == 7);
  for (const auto& r : profile) CHECK(r.entropy_nats == 0.0);
  CHECK(profile.front().order == 2);
  CHECK(profile.back().order == 8);

  CHECK(kind_of([&] { (void)entropy_profile(ramp, 3, 2); }) == ErrorKind::kUnsupportedOrder);
  CHECK(kind_of([&] { (void)entropy_profile(ramp, 2, 11); }) == ErrorKind::kUnsupportedOrder);
  const auto tiny = generate({SyntheticKind::kMonotoneRamp, 5, 0});
  CHECK(kind_of([&] { (void)entropy_profile(tiny, 2, 8); }) == ErrorKind::kInsufficientData);
}

TEST_CASE("i.i.d. noise approaches the uniform pattern law") {
  const auto noise = generate({SyntheticKind::kIIDNoise, 1'000'000, 17});
  const auto profile = entropy_profile(noise, 2, 3);
  CHECK(std::abs(profile[0].entropy_nats - std::log(2.0)) < 1e-3);
  CHECK(profile[1].normalized >= 0.9999);
  // First-order bias of the plug-in estimator: (n!-1)/(2N ln n!) ~ 1.4e-6.
  CHECK(1.0 - profile[1].normalized < 20 * normalized_bias(3, 1e6));
}

TEST_CASE("random walk matches the analytic n=3 law") {
  const auto walk = generate({SyntheticKind::kRandomWalk, 1'000'000, 23});
  const auto r = entropy_profile(walk, 3, 3).front();
  // {1/4, 1/8, 1/8, 1/8, 1/8, 1/4} gives H_3 = 2.5 ln 2.
  CHECK(std::abs(r.normalized - 2.5 * std::log(2.0) / std::log(6.0)) < 0.003);
}

TEST_CASE("estimate_k") {
  std::vector<EntropyReport> zeros;
  for (int n = 2; n <= 7; ++n) zeros.push_back(fake_report(n, 0.0));
  const auto z = estimate_k(zeros);
  CHECK(z.k_slope == 0.0);
  CHECK(z.intercept_C == 0.0);
  CHECK(z.max_residual == 0.0);

  std::vector<EntropyReport> line;
  for (int n = 2; n <= 7; ++n) line.push_back(fake_report(n, 0.9 * (n - 1) + 0.1));
  const auto fit = estimate_k(line);
  CHECK(fit.k_slope == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(fit.intercept_C == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(fit.max_residual < 1e-14);
  CHECK(fit.orders_used == std::vector<int>{2, 3, 4, 5, 6, 7});

  // Convex n ln n growth leaves visible residuals.
  std::vector<EntropyReport> convex;
  for (int n = 2; n <= 8; ++n) convex.push_back(fake_report(n, n * std::log(n)));
  CHECK(estimate_k(convex).max_residual > 0.1);

  CHECK(kind_of([] { (void)estimate_k({fake_report(3, 1.0)}); }) == ErrorKind::kInsufficientData);
  CHECK(kind_of([] { (void)estimate_k({fake_report(3, 1.0), fake_report(3, 1.1)}); }) ==
        ErrorKind::kInsufficientData);
}

TEST_CASE("sliding_scan geometry") {
  std::vector<double> v(14);
  std::iota(v.begin(), v.end(), 0.0);
  ScanConfig cfg;
  cfg.order = 3;
  cfg.window_len = 10;
  cfg.step = 2;
  const auto pts = sliding_scan(TimeSeries::make(v), cfg);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].start_index == 0);
  CHECK(pts[1].start_index == 2);
  CHECK(pts[2].start_index == 4);

  const auto walk = generate({SyntheticKind::kRandomWalk, 10000, 1});
  ScanConfig defaults;
  const auto one = sliding_scan(walk, defaults);
  REQUIRE(one.size() == 1);
  CHECK(one[0].report.normalized < 1.0);

  cfg.window_len = 20;
  CHECK(kind_of([&] { (void)sliding_scan(TimeSeries::make(v), cfg); }) ==
        ErrorKind::kInsufficientData);
}

TEST_CASE("sliding_scan equals entropy over explicit slices") {
  const auto base = generate({SyntheticKind::kQuantizedWalk, 50, 4, 1.0});
  for (std::size_t n_len = 2; n_len <= 50; ++n_len) {
    const TimeSeries series{{base.values.begin(), base.values.begin() + n_len}, std::nullopt};
    for (std::size_t w = 2; w <= 10; ++w) {
      for (std::size_t s = 1; s <= 5; ++s) {
        const std::size_t expected = n_len >= w ? (n_len - w) / s + 1 : 0;
        CHECK(scan_point_count(n_len, w, s) == expected);
        if (n_len < w) continue;
        ScanConfig cfg;
        cfg.order = 2;
        cfg.window_len = w;
        cfg.step = s;
        const auto pts = sliding_scan(series, cfg);
        REQUIRE(pts.size() == expected);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          CHECK(pts[i].start_index == i * s);
          const std::vector<double> slice(series.values.begin() + i * s,
                                          series.values.begin() + i * s + w);
          const auto direct = entropy(pattern_histogram(slice, 2));
          CHECK(pts[i].report.entropy_nats == direct.entropy_nats);
          CHECK(pts[i].report.total_windows == direct.total_windows);
        }
      }
    }
  }
}

TEST_CASE("sliding_scan is independent of worker count") {
  auto walk = generate({SyntheticKind::kQuantizedWalk, 30000, 9, 1.0});
  ScanConfig cfg;
  cfg.order = 5;
  cfg.window_len = 3000;
  cfg.step = 700;
  cfg.tie_policy = Jitter{3, default_jitter_amplitude(walk.view())};
  const auto a = sliding_scan(walk, cfg, {1});
  for (unsigned w : {2u, 4u, 8u}) {
    const auto b = sliding_scan(walk, cfg, {w});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].start_index == b[i].start_index);
      CHECK(a[i].report.entropy_nats == b[i].report.entropy_nats);
    }
  }
}

TEST_CASE("sliding_scan carries window start timestamps") {
  std::vector<double> v(20);
  std::iota(v.begin(), v.end(), 0.0);
  std::vector<std::int64_t> ts(20);
  for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = 1000 + 10 * static_cast<std::int64_t>(i);
  ScanConfig cfg;
  cfg.order = 2;
  cfg.window_len = 8;
  cfg.step = 5;
  const auto pts = sliding_scan(TimeSeries::make(v, ts), cfg);
  REQUIRE(pts.size() == 3);
  CHECK(*pts[2].timestamp == 1100);
}

TEST_CASE("multiscale_table") {
  const auto walk = generate({SyntheticKind::kRandomWalk, 20000, 5});
  MultiscaleConfig cfg;
  cfg.order = 4;
  const auto rows = multiscale_table(walk, cfg);
  REQUIRE(rows.size() == 6);
  const std::vector<int> scales{1, 2, 4, 8, 32, 128};
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].scale == scales[i]);

  // Scale 1 without differencing is the plain single-order profile.
  MultiscaleConfig raw;
  raw.order = 5;
  raw.scales = {1};
  raw.difference_first = false;
  CHECK(multiscale_table(walk, raw).front().report.entropy_nats ==
        entropy_profile(walk, 5, 5).front().entropy_nats);

  // Differencing order matters; the default takes k-tick increments.
  const auto k4 = scale_series(walk, 4, true, DifferenceOrder::kSubsampleThenDifference);
  CHECK(k4.values[0] == walk.values[4] - walk.values[0]);
  const auto sparse = scale_series(walk, 4, true, DifferenceOrder::kDifferenceThenSubsample);
  CHECK(sparse.values[1] == walk.values[5] - walk.values[4]);

  MultiscaleConfig big;
  big.order = 7;
  big.scales = {1, 5000};
  try {
    (void)multiscale_table(walk, big);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
    CHECK(std::string(e.what()).find("5000") != std::string::npos);
  }
  big.scales = {0};
  CHECK(kind_of([&] { (void)multiscale_table(walk, big); }) == ErrorKind::kInvalidScale);
  big.scales = {};
  CHECK(kind_of([&] { (void)multiscale_table(walk, big); }) == ErrorKind::kInvalidScale);
}

TEST_CASE("multiscale_table on i.i.d. increments is flat across scales") {
  // A random walk's k-tick increments are i.i.d. at every scale.
  const auto walk = generate({SyntheticKind::kRandomWalk, 400000, 31});
  MultiscaleConfig cfg;
  cfg.order = 4;
  cfg.scales = {1, 2, 4, 8};
  const auto rows = multiscale_table(walk, cfg);
  for (const auto& r : rows) {
    // Sampling error of the plug-in estimate is far below 2e-3 at >= 5e4 windows.
    CHECK(std::abs(r.report.normalized - rows[0].report.normalized) < 2e-3);
  }
}

TEST_CASE("multiscale_table over segments never spans a break") {
  const auto walk = generate({SyntheticKind::kRandomWalk, 2000, 8});
  TimeSeries a{{walk.values.begin(), walk.values.begin() + 1000}, std::nullopt};
  TimeSeries b{{walk.values.begin() + 1000, walk.values.end()}, std::nullopt};
  MultiscaleConfig cfg;
  cfg.order = 3;
  cfg.scales = {1, 2};
  const auto rows = multiscale_table(std::vector<TimeSeries>{a, b}, cfg);
  // 999 increments per segment at scale 1, 499 at scale 2.
  CHECK(rows[0].report.total_windows == 2 * (999 - 2));
  CHECK(rows[1].report.total_windows == 2 * (499 - 2));
}

TEST_CASE("generate") {
  CHECK(generate({SyntheticKind::kMonotoneRamp, 5, 0}).values ==
        std::vector<double>{0, 1, 2, 3, 4});
  for (auto kind : {SyntheticKind::kRandomWalk, SyntheticKind::kIIDNoise,
                    SyntheticKind::kQuantizedWalk}) {
    const auto a = generate({kind, 1000, 42, 0.5});
    const auto b = generate({kind, 1000, 42, 0.5});
    CHECK(a.values == b.values);
    CHECK(generate({kind, 1000, 43, 0.5}).values != a.values);
  }
  const auto walk = generate({SyntheticKind::kRandomWalk, 10, 1});
  CHECK(walk.values[0] == 0.0);

  const auto q = generate({SyntheticKind::kQuantizedWalk, 100000, 2, 1.0});
  for (double v : q.values) CHECK(v == std::round(v));
  const auto diff = first_difference(q);
  CHECK(entropy(pattern_histogram(diff, 3)).tie_fraction > 0.0);

  CHECK(kind_of([] { (void)generate({SyntheticKind::kRandomWalk, 1, 0}); }) ==
        ErrorKind::kInvalidSpec);
  CHECK(kind_of([] { (void)generate({SyntheticKind::kQuantizedWalk, 10, 0, 0.0}); }) ==
        ErrorKind::kInvalidSpec);
  CHECK(parse_synthetic_kind("quantized-walk") == SyntheticKind::kQuantizedWalk);
}

TEST_CASE("calibrate_null") {
  NullConfig cfg;
  cfg.series_len = 3000;
  cfg.order = 5;
  cfg.trials = 200;
  cfg.confidence = 0.99;
  cfg.seed = 12;
  const auto a = calibrate_null(cfg, {1});
  CHECK(a.critical_value >= 0.0);
  CHECK(a.critical_value <= 1.0);
  CHECK(a.sorted_statistics.size() == 200);
  CHECK(std::is_sorted(a.sorted_statistics.begin(), a.sorted_statistics.end()));
  // 99% of 200 trials is 198: the third-smallest statistic.
  CHECK(a.critical_value == a.sorted_statistics[2]);
  for (unsigned w : {3u, 8u}) {
    const auto b = calibrate_null(cfg, {w});
    CHECK(b.critical_value == a.critical_value);
    CHECK(b.sorted_statistics == a.sorted_statistics);
  }

  cfg.statistic = NullStatistic::kPerSymbol;
  const auto ps = calibrate_null(cfg);
  CHECK(ps.critical_value > 1.0);  // h_5 of i.i.d. increments is near ln(120)/4

  cfg.confidence = 1.0;
  CHECK(kind_of([&] { (void)calibrate_null(cfg); }) == ErrorKind::kParameter);
  cfg.confidence = 0.0;
  CHECK(kind_of([&] { (void)calibrate_null(cfg); }) == ErrorKind::kParameter);
  cfg.confidence = 0.9;
  cfg.trials = 99;
  CHECK(kind_of([&] { (void)calibrate_null(cfg); }) == ErrorKind::kParameter);
  cfg.trials = 100;
  cfg.series_len = 5;
  CHECK(kind_of([&] { (void)calibrate_null(cfg); }) == ErrorKind::kInsufficientData);
}

TEST_CASE("calibrate_null critical value grows with N") {
  NullConfig cfg;
  cfg.order = 5;
  cfg.trials = 500;
  cfg.confidence = 0.99;
  cfg.seed = 4;
  double previous = 0.0;
  for (std::size_t n : {500u, 2000u, 8000u, 32000u}) {
    cfg.series_len = n;
    const double crit = calibrate_null(cfg, {0}).critical_value;
    CHECK(crit >= previous);
    CHECK(crit <= 1.0);
    previous = crit;
  }
}

TEST_CASE("median critical value on long i.i.d. increments approaches 1 from below") {
  NullConfig cfg;
  cfg.order = 4;
  cfg.trials = 100;
  cfg.confidence = 0.5;
  cfg.series_len = 200000;
  cfg.seed = 8;
  const double crit = calibrate_null(cfg, {0}).critical_value;
  CHECK(crit < 1.0);
  CHECK(crit > 1.0 - 5 * normalized_bias(4, 200000));
}
