#include "deepntk/io/output.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "deepntk/errors.hpp"

namespace deepntk::io {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  require(row.size() == columns.size(), "CSV row width does not match the columns");
  rows.push_back(std::move(row));
}

std::string CsvTable::body() const {
  std::ostringstream out;
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j].name;
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << '\n';
  }
  return out.str();
}

std::string RunHeader::render() const {
  std::ostringstream out;
  out << "# deepntk " << command << '\n';
  out << "# version: " << version << '\n';
  out << "# seed: " << seed << '\n';
  out << "# timestamp: " << timestamp << '\n';
  for (const auto& [k, v] : config) out << "# config." << k << ": " << v << '\n';
  return out.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string artifact_version() {
#ifdef DEEPNTK_VERSION
  return DEEPNTK_VERSION;
#else
  return "unknown";
#endif
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) fail(ErrorKind::io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::io, "cannot rename into '" + path + "'");
  }
}

std::string schema_json(const RunHeader& header, const CsvTable& table) {
  nlohmann::ordered_json j;
  j["command"] = header.command;
  j["version"] = header.version;
  j["seed"] = header.seed;
  j["header_lines_prefix"] = "#";
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const auto& c : table.columns) {
    cols.push_back({{"name", c.name}, {"description", c.description}});
  }
  j["columns"] = cols;
  return j.dump(2) + "\n";
}

void write_csv(const std::string& path, const RunHeader& header, const CsvTable& table) {
  write_atomic(path, header.render() + table.body());
  write_atomic(path + ".schema.json", schema_json(header, table));
}

}  // namespace deepntk::io
