#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tabprof {

/// One parsed CSV field. `quoted` is kept so missing-value markers ("NA" and
/// the empty string) can be distinguished from literal quoted tokens.
struct CsvField {
  std::string text;
  bool quoted = false;
};

struct CsvTable {
  std::vector<CsvField> header;
  std::vector<std::vector<CsvField>> rows;
};

/// RFC-style CSV: comma separated, double-quote quoting with "" escapes,
/// rows end at newline outside quotes. Throws ParseError on unbalanced
/// quotes, stray quote characters, or ragged rows.
CsvTable parse_csv(std::string_view text, bool require_rectangular = true);
CsvTable read_csv_file(const std::string& path, bool require_rectangular = true);

/// Quotes a field if it contains a comma, quote, newline, or would otherwise
/// be read back as a missing marker.
std::string csv_quote_if_needed(std::string_view field);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

/// Shortest decimal that round-trips the exact double.
std::string format_double(double v);
/// 12 significant digits, the report precision for meta-feature output.
std::string format_sig12(double v);

/// Strict full-string parse of a finite decimal number.
bool parse_strict_double(std::string_view s, double& out);
bool parse_strict_int64(std::string_view s, long long& out);

}  // namespace tabprof
