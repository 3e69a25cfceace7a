#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "tailgan/series.hpp"

namespace tailgan {

enum class Origin { real, synthetic };

std::string to_string(Origin origin);

// Columns read from a power CSV. Header names are matched exactly.
struct CsvColumns {
  std::string power = "power_db";
  std::string timestamp = "timestamp_s";  // optional in the file
  double default_sample_period = 0.002;   // used when timestamps are absent
};

struct CsvTable {
  SampleSeries series;
  std::vector<Origin> origins;               // empty when the column is absent
  std::vector<std::size_t> regime_labels;    // empty when the column is absent
};

// Parses header plus rows. Errors name the 1-based line of the file.
CsvTable read_csv(const std::string& path, const CsvColumns& columns = {});
SampleSeries ingest_csv(const std::string& path, const CsvColumns& columns = {});

// Writes `index,timestamp_s,power_db[,origin][,regime]` with shortest
// round-trip doubles. An optional column is written when its vector is given,
// which must then match the series length.
void write_csv(const std::string& path, const SampleSeries& series,
               const std::optional<std::vector<Origin>>& origins = std::nullopt,
               const std::optional<std::vector<std::size_t>>& regime_labels = std::nullopt);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

// Reads the power column of a CSV one row at a time.
class CsvStreamReader {
 public:
  explicit CsvStreamReader(const std::string& path, const CsvColumns& columns = {});
  std::optional<double> next();
  std::size_t line() const noexcept { return line_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t power_column_ = 0;
  std::size_t column_count_ = 0;
  std::size_t line_ = 1;
};

}  // namespace tailgan
