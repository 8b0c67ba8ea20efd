#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace deepntk::io {

// Shortest text that round-trips a double (at most 17 significant digits).
std::string format_real(double v);

struct Column {
  std::string name;
  std::string description;
};

struct CsvTable {
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string body() const;
};

// Reproducibility metadata written as '#' comment lines ahead of a CSV body.
struct RunHeader {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::string version;
  std::string timestamp;

  std::string render() const;
};

std::string utc_timestamp();
std::string artifact_version();

// Writes via a temporary file in the same directory and renames it into place.
void write_atomic(const std::string& path, const std::string& content);

// CSV plus a "<path>.schema.json" sidecar describing every column.
void write_csv(const std::string& path, const RunHeader& header, const CsvTable& table);

std::string schema_json(const RunHeader& header, const CsvTable& table);

}  // namespace deepntk::io
