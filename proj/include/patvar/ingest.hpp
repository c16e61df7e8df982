#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patvar/time_series.hpp"

namespace patvar {

struct TickRecord {
  std::int64_t timestamp = 0;  // epoch milliseconds
  std::optional<double> bid;
  std::optional<double> ask;
  std::optional<double> price;
};

enum class PriceMode { kMid, kBid, kAsk, kLast };

std::string_view to_string(PriceMode mode);
PriceMode parse_price_mode(std::string_view text);

struct IngestConfig {
  PriceMode price_mode = PriceMode::kMid;
  std::optional<std::int64_t> gap_threshold_ms;
  bool dedupe_identical = false;
};

enum class DiagnosticLevel { kWarning, kRejected };

struct Diagnostic {
  std::size_t line = 0;  // 1-based line in the input
  DiagnosticLevel level = DiagnosticLevel::kWarning;
  std::string message;
};

enum class TimestampFormat { kEpochMillis, kIso8601 };

struct TickFormat {
  char delimiter = ',';
  TimestampFormat timestamp_format = TimestampFormat::kEpochMillis;
  bool has_bid = false;
  bool has_ask = false;
  bool has_price = false;
};

struct ParseResult {
  std::vector<TickRecord> records;
  std::vector<Diagnostic> diagnostics;
  // Delimiter and columns found in the header; timestamp format is detected
  // from the first data row.
  TickFormat format;
};

// Reads delimiter-separated tick data with a header row. Comma or tab
// delimited (detected from the header), '#' comment lines and blank lines are
// skipped. Throws Error(kSchema) if the header lacks a timestamp column or
// neither a price column nor a bid/ask pair.
ParseResult parse_ticks(std::istream& in);

// Milliseconds since the Unix epoch for "YYYY-MM-DD[T ]hh:mm:ss[.fff][Z]".
std::optional<std::int64_t> parse_iso8601_ms(std::string_view text);

// One series per gap-delimited segment (a single series without a gap
// threshold). Throws Error(kConfiguration) if a record lacks the columns the
// price mode needs.
std::vector<TimeSeries> build_series(const std::vector<TickRecord>& records,
                                     const IngestConfig& cfg);

// Writes "timestamp,price" rows with shortest round-trip formatting, so that
// parse_ticks + build_series(kLast) reproduces the series exactly. Series
// without timestamps get 0, 1, 2, ... ms.
void write_ticks(std::ostream& out, const TimeSeries& series);

std::string format_double(double value);

}  // namespace patvar
