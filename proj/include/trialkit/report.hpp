#pragma once

#include <charconv>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace trialkit::report {

using Value = std::variant<bool, std::int64_t, std::uint64_t, double, std::string>;

struct TableData {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
};

struct Report {
  std::string command;
  std::vector<std::pair<std::string, Value>> scalars;
  std::vector<TableData> tables;
};

namespace detail {

// Shortest decimal that parses back to the identical double; csv and json
// outputs therefore agree exactly after parsing.
inline std::string roundtrip(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::string exact_string(const Value& value) {
  switch (value.index()) {
    case 0:
      return std::get<bool>(value) ? "true" : "false";
    case 1:
      return std::to_string(std::get<std::int64_t>(value));
    case 2:
      return std::to_string(std::get<std::uint64_t>(value));
    case 3:
      return roundtrip(std::get<double>(value));
    default:
      return std::get<std::string>(value);
  }
}

// Human-oriented rendering: fixed six decimals for reals.
inline std::string display_string(const Value& value) {
  if (value.index() == 3) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6f", std::get<double>(value));
    return buffer;
  }
  return exact_string(value);
}

inline nlohmann::ordered_json to_json_value(const Value& value) {
  switch (value.index()) {
    case 0:
      return std::get<bool>(value);
    case 1:
      return std::get<std::int64_t>(value);
    case 2:
      return std::get<std::uint64_t>(value);
    case 3:
      return std::get<double>(value);
    default:
      return std::get<std::string>(value);
  }
}

}  // namespace detail

inline void write_table(const Report& report, std::ostream& out) {
  out << "command = " << report.command << "\n";
  for (const auto& [key, value] : report.scalars) {
    out << key << " = " << detail::display_string(value) << "\n";
  }
  for (const auto& table : report.tables) {
    out << "\n[" << table.name << "]\n";
    std::vector<std::size_t> widths(table.columns.size());
    std::vector<std::vector<std::string>> cells;
    cells.reserve(table.rows.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      widths[c] = table.columns[c].size();
    }
    for (const auto& row : table.rows) {
      std::vector<std::string> rendered;
      rendered.reserve(row.size());
      for (std::size_t c = 0; c < row.size(); ++c) {
        rendered.push_back(detail::display_string(row[c]));
        widths[c] = std::max(widths[c], rendered.back().size());
      }
      cells.push_back(std::move(rendered));
    }
    auto emit_row = [&](const std::vector<std::string>& row) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << row[c];
      }
      out << "\n";
    };
    emit_row(table.columns);
    for (const auto& row : cells) emit_row(row);
  }
}

inline void write_csv(const Report& report, std::ostream& out) {
  out << "# command = " << report.command << "\n";
  if (report.tables.empty()) {
    out << "key,value\n";
    for (const auto& [key, value] : report.scalars) {
      out << key << "," << detail::exact_string(value) << "\n";
    }
    return;
  }
  for (const auto& [key, value] : report.scalars) {
    out << "# " << key << " = " << detail::exact_string(value) << "\n";
  }
  for (const auto& table : report.tables) {
    out << "# table: " << table.name << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      out << (c ? "," : "") << table.columns[c];
    }
    out << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        out << (c ? "," : "") << detail::exact_string(row[c]);
      }
      out << "\n";
    }
  }
}

inline void write_json(const Report& report, std::ostream& out) {
  nlohmann::ordered_json root;
  root["command"] = report.command;
  nlohmann::ordered_json scalars = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.scalars) {
    scalars[key] = detail::to_json_value(value);
  }
  root["scalars"] = std::move(scalars);
  nlohmann::ordered_json tables = nlohmann::ordered_json::object();
  for (const auto& table : report.tables) {
    nlohmann::ordered_json entry;
    entry["columns"] = table.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      nlohmann::ordered_json rendered = nlohmann::ordered_json::array();
      for (const auto& value : row) rendered.push_back(detail::to_json_value(value));
      rows.push_back(std::move(rendered));
    }
    entry["rows"] = std::move(rows);
    tables[table.name] = std::move(entry);
  }
  root["tables"] = std::move(tables);
  out << root.dump(2) << "\n";
}

}  // namespace trialkit::report
