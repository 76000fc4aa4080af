#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifyot/common.h"

namespace ifyot {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal string that round-trips the exact double value. Output is
// locale-independent so re-runs compare byte for byte.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  Index column_index(const std::string& name) const;  // throws IoError
  std::vector<double> numeric_column(const std::string& name) const;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Parses a JSON document; parse failures are reported as ConfigError with
// the byte position nlohmann attaches (line-level for single-line configs,
// exact offset otherwise).
nlohmann::json parse_json(const std::string& text, const std::string& origin);
nlohmann::json load_json_file(const std::string& path);

// Strict accessor over one JSON object: every key must be consumed exactly
// once and close() rejects leftovers, so schema drift in configs is caught
// instead of ignored. Error messages carry the JSON-pointer style path.
class ConfigView {
 public:
  ConfigView(const nlohmann::json& node, std::string path);

  bool has(const std::string& key) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer_or(const std::string& key, long long fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string text(const std::string& key) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  std::vector<double> number_list(const std::string& key) const;
  std::vector<long long> integer_list(const std::string& key) const;
  ConfigView child(const std::string& key) const;
  const nlohmann::json& raw(const std::string& key) const;
  const std::string& path() const { return path_; }

  // Throws ConfigError naming any key never consumed.
  void close() const;

 private:
  const nlohmann::json& field(const std::string& key) const;

  const nlohmann::json* node_;
  std::string path_;
  mutable std::vector<std::string> used_;
};

}  // namespace ifyot
