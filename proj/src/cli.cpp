#include "patvar/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "patvar/analysis.hpp"
#include "patvar/error.hpp"
#include "patvar/ingest.hpp"
#include "patvar/ordinal.hpp"
#include "patvar/version.hpp"

namespace patvar::cli {

namespace {

using nlohmann::json;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes) { EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

// Options shared by the commands that read tick data.
struct InputOptions {
  std::string path = "-";
  std::string price_mode = "auto";
  std::int64_t gap_ms = 0;
  bool dedupe = false;
};

struct PolicyOptions {
  std::string tie_policy = "stable";
  double jitter_amplitude = 0.0;  // 0: derive from the data
};

struct LoadedInput {
  std::vector<TimeSeries> segments;
  std::string digest;
  std::size_t records = 0;
  std::size_t rejected = 0;
  std::string price_mode;
};

std::string single_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

LoadedInput load_input(const InputOptions& opt, std::istream& stdin_stream, std::ostream& err) {
  Sha256 sha;
  ParseResult parsed;
  if (opt.path == "-") {
    std::ostringstream buf;
    buf << stdin_stream.rdbuf();
    const std::string bytes = buf.str();
    sha.update(bytes);
    std::istringstream is(bytes);
    parsed = parse_ticks(is);
  } else {
    std::ifstream file(opt.path, std::ios::binary);
    if (!file) {
      throw Error(ErrorKind::kInvalidInput, fmt::format("cannot open '{}'", opt.path));
    }
    std::array<char, 1 << 16> chunk{};
    while (file.read(chunk.data(), chunk.size()) || file.gcount() > 0) {
      sha.update(std::string_view(chunk.data(), static_cast<std::size_t>(file.gcount())));
    }
    file.clear();
    file.seekg(0);
    parsed = parse_ticks(file);
  }

  LoadedInput loaded;
  loaded.digest = sha.hex();
  for (const auto& d : parsed.diagnostics) {
    if (d.level == DiagnosticLevel::kRejected) ++loaded.rejected;
    err << fmt::format("patvar: {}: line {}: {}\n",
                       d.level == DiagnosticLevel::kRejected ? "rejected" : "warning", d.line,
                       single_line(d.message));
  }
  loaded.records = parsed.records.size();
  if (parsed.records.empty()) throw Error(ErrorKind::kInsufficientData, "input has no tick records");

  IngestConfig cfg;
  if (opt.price_mode == "auto") {
    cfg.price_mode = parsed.format.has_bid && parsed.format.has_ask ? PriceMode::kMid
                                                                    : PriceMode::kLast;
  } else {
    cfg.price_mode = parse_price_mode(opt.price_mode);
  }
  loaded.price_mode = std::string(to_string(cfg.price_mode));
  if (opt.gap_ms > 0) cfg.gap_threshold_ms = opt.gap_ms;
  cfg.dedupe_identical = opt.dedupe;
  loaded.segments = build_series(parsed.records, cfg);
  return loaded;
}

TiePolicy make_policy(const PolicyOptions& opt, std::uint64_t seed,
                      const std::vector<TimeSeries>& segments) {
  if (opt.tie_policy == "stable") return StableRank{};
  if (opt.tie_policy == "skip") return SkipWindow{};
  if (opt.tie_policy == "jitter") {
    double amplitude = opt.jitter_amplitude;
    if (amplitude == 0.0) {
      for (const auto& s : segments) {
        amplitude = std::max(amplitude, default_jitter_amplitude(s.view()));
      }
    }
    return Jitter{seed, amplitude};
  }
  throw Error(ErrorKind::kParameter, fmt::format("unknown tie policy '{}'", opt.tie_policy));
}

std::vector<TimeSeries> maybe_difference(std::vector<TimeSeries> segments, bool difference) {
  if (!difference) return segments;
  std::vector<TimeSeries> out;
  for (const auto& s : segments) {
    if (s.size() >= 2) out.push_back(first_difference(s));
  }
  if (out.empty()) throw Error(ErrorKind::kInsufficientData, "no segment long enough to difference");
  return out;
}

json report_json(const EntropyReport& r) {
  return json{{"order", r.order},
              {"entropy_nats", r.entropy_nats},
              {"per_symbol", r.per_symbol},
              {"normalized", r.normalized},
              {"total_windows", r.total_windows},
              {"tie_fraction", r.tie_fraction}};
}

json input_parameters(const InputOptions& opt, const LoadedInput& loaded) {
  return json{{"input", opt.path},
              {"price_mode", opt.price_mode},
              {"resolved_price_mode", loaded.price_mode},
              {"gap_ms", opt.gap_ms},
              {"dedupe", opt.dedupe}};
}

json policy_parameters(const PolicyOptions& opt, const TiePolicy& policy) {
  json j{{"tie_policy", opt.tie_policy}};
  if (const auto* jitter = std::get_if<Jitter>(&policy)) {
    j["jitter_amplitude"] = jitter->amplitude;
  }
  return j;
}

json provenance(const std::string& digest, std::vector<std::uint64_t> seeds) {
  json j{{"version", std::string(kVersion)}, {"seeds", std::move(seeds)}};
  if (!digest.empty()) j["input_sha256"] = digest;
  return j;
}

void write_envelope(const std::string& path, const std::string& command, json parameters,
                    json results, json prov) {
  if (path.empty()) return;
  json envelope{{"command", command},
                {"parameters", std::move(parameters)},
                {"results", std::move(results)},
                {"provenance", std::move(prov)}};
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::kInvalidInput, fmt::format("cannot write '{}'", path));
  file << envelope.dump(2) << '\n';
}

std::string csv(double v) { return format_double(v); }

std::vector<int> parse_int_list(const std::string& text, std::string_view what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParameter, fmt::format("bad {} entry '{}'", what, item));
    }
  }
  if (out.empty()) throw Error(ErrorKind::kParameter, fmt::format("empty {} list", what));
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParameter, fmt::format("bad value '{}'", item));
    }
  }
  return out;
}

void add_input_options(CLI::App* app, InputOptions& opt) {
  app->add_option("input,--input,-i", opt.path, "Tick file, or - for standard input")
      ->capture_default_str();
  app->add_option("--price-mode", opt.price_mode, "auto, mid, bid, ask or last")
      ->capture_default_str();
  app->add_option("--gap-ms", opt.gap_ms,
                  "Split the series where consecutive ticks are further apart (0: never)")
      ->capture_default_str();
  app->add_flag("--dedupe", opt.dedupe, "Drop ticks whose price equals the previous tick's");
}

void add_policy_options(CLI::App* app, PolicyOptions& opt) {
  app->add_option("--tie-policy", opt.tie_policy, "stable, skip or jitter")
      ->check(CLI::IsMember({"stable", "skip", "jitter"}))
      ->capture_default_str();
  app->add_option("--jitter-amplitude", opt.jitter_amplitude,
                  "Jitter amplitude (0: 2^-40 times the value range)")
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Ordinal-pattern complexity of time series", "patvar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string output;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  bool difference = false;

  // analyze
  InputOptions analyze_in;
  PolicyOptions analyze_policy;
  int n_min = 2;
  int n_max = 8;
  auto* analyze = app.add_subcommand("analyze", "Entropy profile over orders and slope fit");
  add_input_options(analyze, analyze_in);
  add_policy_options(analyze, analyze_policy);
  analyze->add_option("--n-min", n_min)->capture_default_str();
  analyze->add_option("--n-max,--order,-n", n_max)->capture_default_str();

  // scan
  InputOptions scan_in;
  PolicyOptions scan_policy;
  ScanConfig scan_cfg;
  auto* scan = app.add_subcommand("scan", "Normalized complexity over sliding windows");
  add_input_options(scan, scan_in);
  add_policy_options(scan, scan_policy);
  scan->add_option("--order,-n", scan_cfg.order)->capture_default_str();
  scan->add_option("--window", scan_cfg.window_len)->capture_default_str();
  scan->add_option("--step", scan_cfg.step)->capture_default_str();

  // table
  InputOptions table_in;
  PolicyOptions table_policy;
  int table_order = 7;
  std::string scales_text = "1,2,4,8,32,128";
  bool no_difference = false;
  bool difference_before = false;
  std::string layout = "long";
  auto* table = app.add_subcommand("table", "Normalized complexity at several tick scales");
  add_input_options(table, table_in);
  add_policy_options(table, table_policy);
  table->add_option("--order,-n", table_order)->capture_default_str();
  table->add_option("--scales", scales_text, "Comma-separated tick scales")->capture_default_str();
  table->add_flag("--no-difference", no_difference, "Use raw prices instead of increments");
  table->add_flag("--difference-before-subsample", difference_before,
                  "Take single-tick increments, then keep every k-th");
  table->add_option("--layout", layout, "long (one row per scale) or wide (one row)")
      ->check(CLI::IsMember({"long", "wide"}))
      ->capture_default_str();

  // calibrate
  std::string lengths_text;
  int cal_order = 7;
  std::size_t trials = 1000;
  double confidence = 0.99;
  std::string statistic = "normalized";
  bool raw_walk = false;
  bool dump_trials = false;
  auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo critical value on random walks");
  calibrate->add_option("--length,-N", lengths_text, "Series length(s), comma-separated")
      ->required();
  calibrate->add_option("--order,-n", cal_order)->capture_default_str();
  calibrate->add_option("--trials", trials)->capture_default_str();
  calibrate->add_option("--confidence", confidence)->capture_default_str();
  calibrate->add_option("--statistic", statistic, "normalized or per_symbol")
      ->check(CLI::IsMember({"normalized", "per_symbol"}))
      ->capture_default_str();
  calibrate->add_flag("--raw", raw_walk, "Evaluate the walk itself rather than its increments");
  calibrate->add_flag("--dump-trials", dump_trials, "Also print the sorted trial statistics");

  // synth
  std::string kind = "random-walk";
  std::size_t length = 0;
  double tick_size = 1.0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic series in the tick format");
  synth->add_option("--kind", kind, "random-walk, iid-noise, ramp or quantized-walk")
      ->check(CLI::IsMember({"random-walk", "iid-noise", "ramp", "quantized-walk"}))
      ->capture_default_str();
  synth->add_option("--length,-N", length)->required();
  synth->add_option("--tick-size", tick_size)->capture_default_str();

  // patterns
  std::string values_text;
  PolicyOptions pattern_policy;
  auto* patterns = app.add_subcommand("patterns", "Rank vector and index of one window");
  patterns->add_option("--values", values_text, "Comma-separated window values")->required();
  add_policy_options(patterns, pattern_policy);

  for (auto* sub : {analyze, scan, table, calibrate, synth, patterns}) {
    sub->add_option("--output,-o", output,
                    sub == synth ? "Write the series here instead of standard output"
                                 : "Also write a JSON report envelope here");
    sub->add_option("--seed", seed, "Seed for generators and jitter")->capture_default_str();
    sub->add_option("--workers", workers, "Worker threads (results do not depend on it)")
        ->capture_default_str();
  }
  for (auto* sub : {analyze, scan}) {
    sub->add_flag("--difference", difference, "Analyze first differences");
  }

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Parallelism par{workers};
  try {
    if (*analyze) {
      const LoadedInput loaded = load_input(analyze_in, in, err);
      const auto segments = maybe_difference(loaded.segments, difference);
      const TiePolicy policy = make_policy(analyze_policy, seed, segments);
      const auto profile = entropy_profile(segments, n_min, n_max, policy);
      const LinearFit fit = estimate_k(profile);

      out << "order,entropy_nats,per_symbol,normalized,total_windows,tie_fraction\n";
      json rows = json::array();
      for (const auto& r : profile) {
        out << fmt::format("{},{},{},{},{},{}\n", r.order, csv(r.entropy_nats), csv(r.per_symbol),
                           csv(r.normalized), r.total_windows, csv(r.tie_fraction));
        rows.push_back(report_json(r));
      }
      out << fmt::format("# fit k={} C={} max_residual={}\n", csv(fit.k_slope),
                         csv(fit.intercept_C), csv(fit.max_residual));

      json params = input_parameters(analyze_in, loaded);
      params.update(policy_parameters(analyze_policy, policy));
      params["n_min"] = n_min;
      params["n_max"] = n_max;
      params["difference"] = difference;
      json results{{"segments", segments.size()},
                   {"profile", rows},
                   {"fit",
                    {{"k_slope", fit.k_slope},
                     {"intercept_C", fit.intercept_C},
                     {"orders_used", fit.orders_used},
                     {"max_residual", fit.max_residual}}}};
      write_envelope(output, "analyze", params, results, provenance(loaded.digest, {seed}));
    } else if (*scan) {
      const LoadedInput loaded = load_input(scan_in, in, err);
      const auto segments = maybe_difference(loaded.segments, difference);
      scan_cfg.tie_policy = make_policy(scan_policy, seed, segments);

      std::vector<std::pair<std::size_t, std::vector<ScanPoint>>> per_segment;
      for (std::size_t s = 0; s < segments.size(); ++s) {
        if (segments.size() > 1 && segments[s].size() < scan_cfg.window_len) continue;
        per_segment.emplace_back(s, sliding_scan(segments[s], scan_cfg, par));
      }
      if (per_segment.empty()) {
        throw Error(ErrorKind::kInsufficientData,
                    fmt::format("no segment reaches the scan window of {}", scan_cfg.window_len));
      }
      out << "segment,start_index,timestamp,normalized,entropy_nats,tie_fraction\n";
      json rows = json::array();
      for (const auto& [segment, points] : per_segment) {
        for (const auto& p : points) {
          const std::string ts = p.timestamp ? std::to_string(*p.timestamp) : "";
          out << fmt::format("{},{},{},{},{},{}\n", segment, p.start_index, ts,
                             csv(p.report.normalized), csv(p.report.entropy_nats),
                             csv(p.report.tie_fraction));
          json row{{"segment", segment}, {"start_index", p.start_index},
                   {"report", report_json(p.report)}};
          row["timestamp"] = p.timestamp ? json(*p.timestamp) : json(nullptr);
          rows.push_back(std::move(row));
        }
      }
      json params = input_parameters(scan_in, loaded);
      params.update(policy_parameters(scan_policy, scan_cfg.tie_policy));
      params["order"] = scan_cfg.order;
      params["window"] = scan_cfg.window_len;
      params["step"] = scan_cfg.step;
      params["difference"] = difference;
      write_envelope(output, "scan", params, json{{"points", rows}},
                     provenance(loaded.digest, {seed}));
    } else if (*table) {
      const LoadedInput loaded = load_input(table_in, in, err);
      MultiscaleConfig cfg;
      cfg.order = table_order;
      cfg.scales = parse_int_list(scales_text, "scale");
      cfg.difference_first = !no_difference;
      cfg.difference_order = difference_before ? DifferenceOrder::kDifferenceThenSubsample
                                               : DifferenceOrder::kSubsampleThenDifference;
      cfg.tie_policy = make_policy(table_policy, seed, loaded.segments);
      const auto rows = multiscale_table(loaded.segments, cfg);

      json jrows = json::array();
      if (layout == "wide") {
        std::vector<std::string> head;
        std::vector<std::string> vals;
        for (const auto& r : rows) {
          head.push_back(fmt::format("{} {}", r.scale, r.scale == 1 ? "Tick" : "Ticks"));
          vals.push_back(csv(r.report.normalized));
        }
        out << fmt::format("{}\n{}\n", fmt::join(head, ","), fmt::join(vals, ","));
      } else {
        out << "scale,normalized,entropy_nats,per_symbol,total_windows,tie_fraction\n";
        for (const auto& r : rows) {
          out << fmt::format("{},{},{},{},{},{}\n", r.scale, csv(r.report.normalized),
                             csv(r.report.entropy_nats), csv(r.report.per_symbol),
                             r.report.total_windows, csv(r.report.tie_fraction));
        }
      }
      for (const auto& r : rows) {
        jrows.push_back(json{{"scale", r.scale}, {"report", report_json(r.report)}});
      }
      json params = input_parameters(table_in, loaded);
      params.update(policy_parameters(table_policy, cfg.tie_policy));
      params["order"] = table_order;
      params["scales"] = cfg.scales;
      params["difference"] = cfg.difference_first;
      params["difference_order"] =
          difference_before ? "difference-then-subsample" : "subsample-then-difference";
      write_envelope(output, "table", params, json{{"rows", jrows}},
                     provenance(loaded.digest, {seed}));
    } else if (*calibrate) {
      std::vector<std::size_t> lengths;
      for (double v : parse_double_list(lengths_text)) {
        if (!(v >= 1.0) || v != std::floor(v)) {
          throw Error(ErrorKind::kParameter, fmt::format("bad series length {}", v));
        }
        lengths.push_back(static_cast<std::size_t>(v));
      }
      out << "length,order,trials,confidence,statistic,difference,critical_value\n";
      json results = json::array();
      std::vector<NullCalibration> cals;
      for (std::size_t len : lengths) {
        NullConfig cfg;
        cfg.series_len = len;
        cfg.order = cal_order;
        cfg.trials = trials;
        cfg.confidence = confidence;
        cfg.seed = seed;
        cfg.statistic = parse_null_statistic(statistic);
        cfg.difference = !raw_walk;
        cals.push_back(calibrate_null(cfg, par));
        const auto& c = cals.back();
        out << fmt::format("{},{},{},{},{},{},{}\n", c.series_len, c.order, c.trials,
                           csv(c.confidence), to_string(c.statistic), c.difference ? 1 : 0,
                           csv(c.critical_value));
        json j{{"series_len", c.series_len}, {"order", c.order},
               {"trials", c.trials},         {"confidence", c.confidence},
               {"critical_value", c.critical_value}, {"seed", c.seed},
               {"statistic", to_string(c.statistic)}, {"difference", c.difference},
               {"bias_estimate", normalized_bias(c.order, static_cast<double>(
                                                             c.series_len - c.order -
                                                             (c.difference ? 1 : 0) + 1))}};
        if (dump_trials) j["sorted_statistics"] = c.sorted_statistics;
        results.push_back(std::move(j));
      }
      if (dump_trials) {
        for (const auto& c : cals) {
          out << fmt::format("# sorted trial statistics, length {}\nrank,statistic\n",
                             c.series_len);
          for (std::size_t i = 0; i < c.sorted_statistics.size(); ++i) {
            out << fmt::format("{},{}\n", i, csv(c.sorted_statistics[i]));
          }
        }
      }
      json params{{"lengths", lengths},     {"order", cal_order},   {"trials", trials},
                  {"confidence", confidence}, {"statistic", statistic}, {"difference", !raw_walk}};
      write_envelope(output, "calibrate", params, json{{"calibrations", results}},
                     provenance("", {seed}));
    } else if (*synth) {
      SyntheticSpec spec;
      spec.kind = parse_synthetic_kind(kind);
      spec.length = length;
      spec.seed = seed;
      spec.tick_size = tick_size;
      TimeSeries series = generate(spec);
      // Tick prices must be positive: shift by a whole number so the minimum
      // is at least 1. Ordinal patterns are unaffected by the shift.
      const double lo = *std::min_element(series.values.begin(), series.values.end());
      const double offset = lo < 1.0 ? std::ceil(1.0 - lo) : 0.0;
      for (auto& v : series.values) v += offset;
      std::ostringstream body;
      body << fmt::format("# synth kind={} length={} seed={} tick_size={} offset={}\n", kind,
                          length, seed, csv(tick_size), csv(offset));
      write_ticks(body, series);
      if (output.empty()) {
        out << body.str();
      } else {
        std::ofstream file(output, std::ios::binary);
        if (!file) throw Error(ErrorKind::kInvalidInput, fmt::format("cannot write '{}'", output));
        file << body.str();
      }
    } else if (*patterns) {
      const auto values = parse_double_list(values_text);
      const TiePolicy policy =
          make_policy(pattern_policy, seed, {TimeSeries{values, std::nullopt}});
      validate_policy(policy, values);
      const auto encoded = encode_pattern(values, policy);
      const auto ranks = rank_vector(values, policy);
      out << "rank_vector,index,skipped\n";
      out << fmt::format("{},{},{}\n", fmt::join(ranks, " "),
                         encoded ? std::to_string(encoded->index) : "", encoded ? 0 : 1);
      json params{{"values", values}};
      params.update(policy_parameters(pattern_policy, policy));
      json results{{"rank_vector", ranks}, {"skipped", !encoded}};
      results["index"] = encoded ? json(encoded->index) : json(nullptr);
      write_envelope(output, "patterns", params, results, provenance("", {seed}));
    }
  } catch (const Error& e) {
    const bool usage = e.kind() == ErrorKind::kParameter || e.kind() == ErrorKind::kUnsupportedOrder ||
                       e.kind() == ErrorKind::kInvalidOrder || e.kind() == ErrorKind::kInvalidScale ||
                       e.kind() == ErrorKind::kInvalidSpec ||
                       e.kind() == ErrorKind::kConfiguration;
    err << fmt::format("patvar: error: {}: {}\n", to_string(e.kind()), single_line(e.what()));
    return usage ? kExitUsage : kExitData;
  }
  return kExitOk;
}

}  // namespace patvar::cli
