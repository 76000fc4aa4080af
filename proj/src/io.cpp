#include "ifyot/io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ifyot {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw IoError("csv row width " + std::to_string(row.size()) +
                  " does not match header width " +
                  std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

Index CsvTable::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw IoError("csv column not found: " + name);
  return static_cast<Index>(it - columns.begin());
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  Index c = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const std::string& cell = row[static_cast<std::size_t>(c)];
    if (cell == "nan") {
      out.push_back(std::nan(""));
      continue;
    }
    if (cell == "inf") {
      out.push_back(kInf);
      continue;
    }
    if (cell == "-inf") {
      out.push_back(-kInf);
      continue;
    }
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw IoError("csv column " + name + " has non-numeric cell: " + cell);
    out.push_back(v);
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    out << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << row[c];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  CsvTable table;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (header) {
      table.columns = std::move(cells);
      header = false;
    } else {
      table.add_row(std::move(cells));
    }
  }
  if (header) throw IoError("empty csv: " + path);
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

nlohmann::json load_json_file(const std::string& path) {
  return parse_json(read_text_file(path), path);
}

ConfigView::ConfigView(const nlohmann::json& node, std::string path)
    : node_(&node), path_(std::move(path)) {
  if (!node.is_object())
    throw ConfigError(path_ + ": expected an object, got " +
                      std::string(node.type_name()));
}

const nlohmann::json& ConfigView::field(const std::string& key) const {
  auto it = node_->find(key);
  if (it == node_->end())
    throw ConfigError(path_ + "/" + key + ": missing required key");
  used_.push_back(key);
  return *it;
}

bool ConfigView::has(const std::string& key) const {
  return node_->find(key) != node_->end();
}

double ConfigView::number(const std::string& key) const {
  const nlohmann::json& v = field(key);
  if (!v.is_number())
    throw ConfigError(path_ + "/" + key + ": expected a number");
  return v.get<double>();
}

double ConfigView::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long ConfigView::integer(const std::string& key) const {
  const nlohmann::json& v = field(key);
  if (!v.is_number_integer())
    throw ConfigError(path_ + "/" + key + ": expected an integer");
  return v.get<long long>();
}

long long ConfigView::integer_or(const std::string& key,
                                 long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool ConfigView::boolean_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const nlohmann::json& v = field(key);
  if (!v.is_boolean())
    throw ConfigError(path_ + "/" + key + ": expected a boolean");
  return v.get<bool>();
}

std::string ConfigView::text(const std::string& key) const {
  const nlohmann::json& v = field(key);
  if (!v.is_string())
    throw ConfigError(path_ + "/" + key + ": expected a string");
  return v.get<std::string>();
}

std::string ConfigView::text_or(const std::string& key,
                                const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

std::vector<double> ConfigView::number_list(const std::string& key) const {
  const nlohmann::json& v = field(key);
  if (!v.is_array())
    throw ConfigError(path_ + "/" + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number())
      throw ConfigError(path_ + "/" + key + ": expected an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<long long> ConfigView::integer_list(const std::string& key) const {
  const nlohmann::json& v = field(key);
  if (!v.is_array())
    throw ConfigError(path_ + "/" + key + ": expected an array of integers");
  std::vector<long long> out;
  for (const auto& item : v) {
    if (!item.is_number_integer())
      throw ConfigError(path_ + "/" + key + ": expected an array of integers");
    out.push_back(item.get<long long>());
  }
  return out;
}

ConfigView ConfigView::child(const std::string& key) const {
  const nlohmann::json& v = field(key);
  return ConfigView(v, path_ + "/" + key);
}

const nlohmann::json& ConfigView::raw(const std::string& key) const {
  return field(key);
}

void ConfigView::close() const {
  for (auto it = node_->begin(); it != node_->end(); ++it) {
    if (std::find(used_.begin(), used_.end(), it.key()) == used_.end())
      throw ConfigError(path_ + "/" + it.key() + ": unknown key");
  }
}

}  // namespace ifyot
