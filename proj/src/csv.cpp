#include "tailgan/csv.hpp"

#include <charconv>
#include <cmath>
#include <string_view>

#include "tailgan/errors.hpp"

namespace tailgan {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

double parse_double(std::string_view field, const std::string& path, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IoError(where(path, line) + "cannot parse '" + std::string(field) + "' as a number");
  }
  if (!std::isfinite(v)) throw IoError(where(path, line) + "non-finite value '" + std::string(field) + "'");
  return v;
}

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  return std::nullopt;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

std::string to_string(Origin origin) { return origin == Origin::real ? "real" : "synthetic"; }

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

CsvTable read_csv(const std::string& path, const CsvColumns& columns) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const std::string header_line = line;
  const auto header = split_fields(header_line);
  const auto power_col = find_column(header, columns.power);
  if (!power_col) throw IoError(where(path, 1) + "missing column '" + columns.power + "'");
  const auto time_col = find_column(header, columns.timestamp);
  const auto origin_col = find_column(header, "origin");
  const auto regime_col = find_column(header, "regime");

  std::vector<double> values;
  std::vector<double> times;
  std::vector<Origin> origins;
  std::vector<std::size_t> regimes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw IoError(where(path, line_no) + "expected " + std::to_string(header.size()) +
                    " fields, found " + std::to_string(fields.size()));
    }
    values.push_back(parse_double(fields[*power_col], path, line_no));
    if (time_col) times.push_back(parse_double(fields[*time_col], path, line_no));
    if (origin_col) {
      const auto tag = trim(fields[*origin_col]);
      if (tag == "real") {
        origins.push_back(Origin::real);
      } else if (tag == "synthetic") {
        origins.push_back(Origin::synthetic);
      } else {
        throw IoError(where(path, line_no) + "unknown origin '" + std::string(tag) + "'");
      }
    }
    if (regime_col) {
      const auto field = trim(fields[*regime_col]);
      std::size_t label = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), label);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw IoError(where(path, line_no) + "bad regime label '" + std::string(field) + "'");
      }
      regimes.push_back(label);
    }
  }
  double period = columns.default_sample_period;
  if (times.size() >= 2 && times[1] > times[0]) period = times[1] - times[0];
  return {SampleSeries(std::move(values), period, path), std::move(origins), std::move(regimes)};
}

SampleSeries ingest_csv(const std::string& path, const CsvColumns& columns) {
  return read_csv(path, columns).series;
}

void write_csv(const std::string& path, const SampleSeries& series, const std::optional<std::vector<Origin>>& origins,
               const std::optional<std::vector<std::size_t>>& regime_labels) {
  if (origins && origins->size() != series.size()) {
    throw DimensionError("origin tags do not match the series length");
  }
  if (regime_labels && regime_labels->size() != series.size()) {
    throw DimensionError("regime labels do not match the series length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "index,timestamp_s,power_db";
  if (origins) out << ",origin";
  if (regime_labels) out << ",regime";
  out << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << i << ',' << format_double(static_cast<double>(i) * series.sample_period()) << ','
        << format_double(series[i]);
    if (origins) out << ',' << to_string((*origins)[i]);
    if (regime_labels) out << ',' << (*regime_labels)[i];
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

CsvStreamReader::CsvStreamReader(const std::string& path, const CsvColumns& columns)
    : in_(open_input(path)), path_(path) {
  std::string line;
  if (!std::getline(in_, line)) throw IoError(path + ": empty file");
  const auto header = split_fields(line);
  const auto col = find_column(header, columns.power);
  if (!col) throw IoError(where(path, 1) + "missing column '" + columns.power + "'");
  power_column_ = *col;
  column_count_ = header.size();
}

std::optional<double> CsvStreamReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != column_count_) {
      throw IoError(where(path_, line_) + "expected " + std::to_string(column_count_) + " fields, found " +
                    std::to_string(fields.size()));
    }
    return parse_double(fields[power_column_], path_, line_);
  }
  return std::nullopt;
}

}  // namespace tailgan
