#include "tabprof/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tabprof/error.hpp"

namespace tabprof {

namespace {

// Splits raw text into records of fields, tracking quote state.
std::vector<std::vector<CsvField>> parse_records(std::string_view text) {
  std::vector<std::vector<CsvField>> records;
  std::vector<CsvField> current;
  CsvField field;
  bool in_quotes = false;
  bool field_started_quoted = false;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto end_field = [&] {
    field.quoted = field_started_quoted;
    current.push_back(std::move(field));
    field = CsvField{};
    field_started_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
  };

  while (i < n) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.text.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field.text.push_back(c);
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (!field.text.empty() || field_started_quoted) {
          fail(errc::parse_error, "stray quote inside unquoted field");
        }
        in_quotes = true;
        field_started_quoted = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < n && text[i + 1] == '\n') ++i;
        end_record();
        ++i;
        break;
      case '\n':
        end_record();
        ++i;
        break;
      default:
        if (field_started_quoted) {
          fail(errc::parse_error, "text after closing quote");
        }
        field.text.push_back(c);
        ++i;
        break;
    }
  }
  if (in_quotes) fail(errc::parse_error, "unterminated quoted field");
  // Final record without trailing newline.
  if (!field.text.empty() || field_started_quoted || !current.empty()) {
    end_record();
  }
  return records;
}

}  // namespace

CsvTable parse_csv(std::string_view text, bool require_rectangular) {
  auto records = parse_records(text);
  if (records.empty()) fail(errc::parse_error, "empty CSV (no header row)");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (require_rectangular && records[r].size() != t.header.size()) {
      fail(errc::parse_error,
           "row " + std::to_string(r) + " has " +
               std::to_string(records[r].size()) + " fields, expected " +
               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path, bool require_rectangular) {
  return parse_csv(read_text_file(path), require_rectangular);
}

std::string csv_quote_if_needed(std::string_view field) {
  const bool needs =
      field.empty() || field == "NA" ||
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(errc::io_error, "short write to " + path);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

bool parse_strict_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;  // from_chars rejects a leading plus
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last && std::isfinite(out);
}

bool parse_strict_int64(std::string_view s, long long& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

}  // namespace tabprof
