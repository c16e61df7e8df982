#include "patvar/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "patvar/error.hpp"

namespace patvar {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool is_integer_text(std::string_view s) {
  if (!s.empty() && s.front() == '-') s.remove_prefix(1);
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct Columns {
  std::size_t count = 0;
  std::optional<std::size_t> timestamp, bid, ask, price;
};

Columns read_header(std::string_view line, char delim) {
  Columns cols;
  const auto names = split(line, delim);
  cols.count = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string name = lower(names[i]);
    auto assign = [&](std::optional<std::size_t>& slot) {
      if (slot) throw Error(ErrorKind::kSchema, fmt::format("duplicate column '{}'", name));
      slot = i;
    };
    if (name == "timestamp") assign(cols.timestamp);
    else if (name == "bid") assign(cols.bid);
    else if (name == "ask") assign(cols.ask);
    else if (name == "price") assign(cols.price);
  }
  if (!cols.timestamp) throw Error(ErrorKind::kSchema, "header has no 'timestamp' column");
  if (!cols.price && !(cols.bid && cols.ask)) {
    throw Error(ErrorKind::kSchema, "header needs a 'price' column or both 'bid' and 'ask'");
  }
  return cols;
}

std::optional<double> price_field(const std::vector<std::string_view>& fields,
                                  std::optional<std::size_t> col, std::string_view name,
                                  std::string& problem) {
  if (!col || fields[*col].empty()) return std::nullopt;
  const auto v = parse_number<double>(fields[*col]);
  if (!v || !std::isfinite(*v)) {
    problem = fmt::format("unparsable {} '{}'", name, fields[*col]);
    return std::nullopt;
  }
  if (*v <= 0.0) {
    problem = fmt::format("non-positive {} {}", name, fields[*col]);
    return std::nullopt;
  }
  return v;
}

double chosen_price(const TickRecord& r, PriceMode mode, std::size_t index) {
  auto missing = [&](std::string_view what) {
    return Error(ErrorKind::kConfiguration,
                 fmt::format("price mode {} needs {} but record {} has none", to_string(mode),
                             what, index));
  };
  switch (mode) {
    case PriceMode::kMid:
      if (!r.bid || !r.ask) throw missing("bid and ask");
      return (*r.bid + *r.ask) / 2.0;
    case PriceMode::kBid:
      if (!r.bid) throw missing("bid");
      return *r.bid;
    case PriceMode::kAsk:
      if (!r.ask) throw missing("ask");
      return *r.ask;
    case PriceMode::kLast:
      if (!r.price) throw missing("price");
      return *r.price;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(PriceMode mode) {
  switch (mode) {
    case PriceMode::kMid: return "mid";
    case PriceMode::kBid: return "bid";
    case PriceMode::kAsk: return "ask";
    case PriceMode::kLast: return "last";
  }
  return "unknown";
}

PriceMode parse_price_mode(std::string_view text) {
  for (auto m : {PriceMode::kMid, PriceMode::kBid, PriceMode::kAsk, PriceMode::kLast}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::kConfiguration, fmt::format("unknown price mode '{}'", text));
}

std::optional<std::int64_t> parse_iso8601_ms(std::string_view text) {
  // YYYY-MM-DD[T ]hh:mm:ss[.fff...][Z]
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  const auto year = parse_number<int>(text.substr(0, 4));
  const auto month = parse_number<unsigned>(text.substr(5, 2));
  const auto day = parse_number<unsigned>(text.substr(8, 2));
  const auto hour = parse_number<int>(text.substr(11, 2));
  const auto minute = parse_number<int>(text.substr(14, 2));
  const auto second = parse_number<int>(text.substr(17, 2));
  if (!year || !month || !day || !hour || !minute || !second) return std::nullopt;
  if (*hour > 23 || *minute > 59 || *second > 60) return std::nullopt;
  int millis = 0;
  std::string_view frac = text.substr(19);
  if (!frac.empty()) {
    if (frac.front() != '.' || frac.size() < 2) return std::nullopt;
    frac.remove_prefix(1);
    if (!std::all_of(frac.begin(), frac.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    const std::string digits = std::string(frac.substr(0, 3)) + std::string(3 - std::min<std::size_t>(3, frac.size()), '0');
    millis = *parse_number<int>(digits);
  }
  const std::chrono::year_month_day ymd{std::chrono::year{*year}, std::chrono::month{*month},
                                        std::chrono::day{*day}};
  if (!ymd.ok()) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return ((static_cast<std::int64_t>(days) * 24 + *hour) * 60 + *minute) * 60000LL +
         static_cast<std::int64_t>(*second) * 1000 + millis;
}

ParseResult parse_ticks(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::optional<Columns> cols;
  std::optional<TimestampFormat> ts_format;
  std::optional<std::int64_t> last_ts;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") {
      line.erase(0, 3);
    }
    if (!cols) {
      const std::string_view header = trim(line);
      result.format.delimiter = header.find('\t') != std::string_view::npos ? '\t' : ',';
      cols = read_header(header, result.format.delimiter);
      result.format.has_bid = cols->bid.has_value();
      result.format.has_ask = cols->ask.has_value();
      result.format.has_price = cols->price.has_value();
      continue;
    }
    auto reject = [&](std::string message) {
      result.diagnostics.push_back({line_no, DiagnosticLevel::kRejected, std::move(message)});
    };
    const auto fields = split(view, result.format.delimiter);
    if (fields.size() != cols->count) {
      reject(fmt::format("expected {} fields, found {}", cols->count, fields.size()));
      continue;
    }
    const std::string_view ts_text = fields[*cols->timestamp];
    if (!ts_format) {
      ts_format = is_integer_text(ts_text) ? TimestampFormat::kEpochMillis
                                           : TimestampFormat::kIso8601;
      result.format.timestamp_format = *ts_format;
    }
    const auto ts = *ts_format == TimestampFormat::kEpochMillis ? parse_number<std::int64_t>(ts_text)
                                                                : parse_iso8601_ms(ts_text);
    if (!ts) {
      reject(fmt::format("unparsable timestamp '{}'", ts_text));
      continue;
    }
    TickRecord rec;
    rec.timestamp = *ts;
    std::string problem;
    rec.bid = price_field(fields, cols->bid, "bid", problem);
    if (problem.empty()) rec.ask = price_field(fields, cols->ask, "ask", problem);
    if (problem.empty()) rec.price = price_field(fields, cols->price, "price", problem);
    if (!problem.empty()) {
      reject(std::move(problem));
      continue;
    }
    if (!rec.price && !(rec.bid && rec.ask)) {
      reject("row has neither a price nor a bid/ask pair");
      continue;
    }
    if (rec.bid && rec.ask && *rec.ask < *rec.bid) {
      reject(fmt::format("crossed quote: ask {} below bid {}", *rec.ask, *rec.bid));
      continue;
    }
    if (last_ts && rec.timestamp < *last_ts) {
      result.diagnostics.push_back(
          {line_no, DiagnosticLevel::kWarning,
           fmt::format("timestamp {} precedes previous {}", rec.timestamp, *last_ts)});
    }
    last_ts = rec.timestamp;
    result.records.push_back(rec);
  }
  if (!cols) throw Error(ErrorKind::kSchema, "input has no header row");
  return result;
}

std::vector<TimeSeries> build_series(const std::vector<TickRecord>& records,
                                     const IngestConfig& cfg) {
  if (records.empty()) throw Error(ErrorKind::kInsufficientData, "no tick records");
  if (cfg.gap_threshold_ms && *cfg.gap_threshold_ms <= 0) {
    throw Error(ErrorKind::kConfiguration, "gap threshold must be positive");
  }
  std::vector<TimeSeries> out;
  TimeSeries current;
  current.timestamps.emplace();
  std::optional<std::int64_t> prev_ts;
  std::optional<double> prev_price;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TickRecord& r = records[i];
    const double price = chosen_price(r, cfg.price_mode, i);
    // Out-of-order ticks keep their place but are clamped to the previous
    // timestamp so each series stays non-decreasing.
    const std::int64_t ts = prev_ts ? std::max(*prev_ts, r.timestamp) : r.timestamp;
    if (cfg.gap_threshold_ms && prev_ts && ts - *prev_ts > *cfg.gap_threshold_ms &&
        !current.empty()) {
      out.push_back(std::move(current));
      current = TimeSeries{};
      current.timestamps.emplace();
      prev_price.reset();
    }
    prev_ts = ts;
    if (cfg.dedupe_identical && prev_price && *prev_price == price) continue;
    prev_price = price;
    current.values.push_back(price);
    current.timestamps->push_back(ts);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ec == std::errc{} ? ptr : buf.data());
}

void write_ticks(std::ostream& out, const TimeSeries& series) {
  out << "timestamp,price\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::int64_t ts =
        series.timestamps ? (*series.timestamps)[i] : static_cast<std::int64_t>(i);
    out << ts << ',' << format_double(series.values[i]) << '\n';
  }
}

}  // namespace patvar
