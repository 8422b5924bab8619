#include "rfz/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rfz/errors.hpp"

namespace rfz {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      end_record();
    } else if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) throw DataError("csv: text after a closing quote");
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool is_missing_cell(std::string_view cell) noexcept { return cell.empty() || cell == "NA" || cell == "?"; }

std::optional<double> parse_number(std::string_view cell) noexcept {
  while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
  while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace {

std::set<std::string> sidecar_categorical(const std::optional<std::string>& json_text) {
  std::set<std::string> out;
  if (!json_text) return out;
  try {
    auto j = nlohmann::json::parse(*json_text);
    for (const auto& name : j.at("categorical")) out.insert(name.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("schema sidecar: ") + e.what());
  }
  return out;
}

std::vector<std::vector<std::string>> read_table(std::istream& in) {
  auto records = parse_csv(in);
  if (records.empty()) throw DataError("csv: no header row");
  const auto width = records[0].size();
  for (std::size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != width)
      throw DataError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                      " fields, header has " + std::to_string(width));
  return records;
}

}  // namespace

Dataset read_dataset(std::istream& in, const CsvOptions& opts) {
  const auto records = read_table(in);
  const auto& header = records[0];
  if (records.size() < 2) throw DataError("csv: no data rows");
  if (header.size() < 2) throw DataError("csv: need at least one variable and a target column");

  std::size_t target = header.size() - 1;
  if (opts.target) {
    auto it = std::find(header.begin(), header.end(), *opts.target);
    if (it == header.end()) throw DataError("csv: no target column '" + *opts.target + "'");
    target = static_cast<std::size_t>(it - header.begin());
  }
  const auto forced = sidecar_categorical(opts.schema_json);

  Dataset ds;
  ds.target_name = header[target];
  const auto n = records.size() - 1;

  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target) columns.push_back(c);

  for (auto c : columns) {
    Variable v;
    v.name = header[c];
    bool numeric = !forced.contains(v.name);
    for (std::size_t r = 1; numeric && r <= n; ++r)
      if (!is_missing_cell(records[r][c]) && !parse_number(records[r][c])) numeric = false;
    v.kind = numeric ? VariableKind::numerical : VariableKind::categorical;
    if (!numeric) {
      for (std::size_t r = 1; r <= n; ++r) {
        const auto& cell = records[r][c];
        if (is_missing_cell(cell)) continue;
        if (std::find(v.categories.begin(), v.categories.end(), cell) == v.categories.end())
          v.categories.push_back(cell);
      }
      if (v.categories.empty()) throw DataError("csv: column '" + v.name + "' has no values");
    }
    ds.schema.variables.push_back(std::move(v));
  }
  ds.schema.n_obs = n;

  bool numeric_target = true;
  for (std::size_t r = 1; r <= n; ++r) {
    if (is_missing_cell(records[r][target])) throw DataError("csv: missing target in row " + std::to_string(r + 1));
    if (!parse_number(records[r][target])) numeric_target = false;
  }
  ds.task = opts.task.value_or(numeric_target ? Task::regression : Task::classification);
  if (ds.task == Task::regression && !numeric_target) throw DataError("csv: regression target is not numeric");

  std::map<std::string, std::size_t> label_index;
  for (std::size_t r = 1; r <= n; ++r) {
    Observation x;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto& cell = records[r][columns[j]];
      const auto& var = ds.schema.variables[j];
      if (is_missing_cell(cell)) {
        x.push_back(std::nullopt);
      } else if (var.kind == VariableKind::numerical) {
        x.push_back(*parse_number(cell));
      } else {
        auto it = std::find(var.categories.begin(), var.categories.end(), cell);
        x.push_back(static_cast<double>(it - var.categories.begin()));
      }
    }
    ds.rows.push_back(std::move(x));
    const auto& cell = records[r][target];
    if (ds.task == Task::regression) {
      ds.targets.push_back(*parse_number(cell));
    } else {
      auto [it, inserted] = label_index.try_emplace(cell, ds.class_labels.size());
      if (inserted) ds.class_labels.push_back(cell);
      ds.targets.push_back(static_cast<double>(it->second));
    }
  }
  return ds;
}

Dataset read_observations(std::istream& in, const VariableSchema& schema, Task task,
                          const std::vector<std::string>& class_labels, const std::optional<std::string>& target) {
  const auto records = read_table(in);
  const auto& header = records[0];
  Dataset ds;
  ds.schema = schema;
  ds.task = task;
  ds.class_labels = class_labels;

  std::vector<std::size_t> column(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto it = std::find(header.begin(), header.end(), schema.variables[j].name);
    if (it == header.end()) throw DataError("csv: missing column '" + schema.variables[j].name + "'");
    column[j] = static_cast<std::size_t>(it - header.begin());
  }
  std::optional<std::size_t> target_col;
  if (target) {
    auto it = std::find(header.begin(), header.end(), *target);
    if (it == header.end()) throw DataError("csv: no target column '" + *target + "'");
    target_col = static_cast<std::size_t>(it - header.begin());
  } else if (!header.empty() && !schema.index_of(header.back())) {
    target_col = header.size() - 1;
  }
  if (target_col) ds.target_name = header[*target_col];

  for (std::size_t r = 1; r < records.size(); ++r) {
    Observation x;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& cell = records[r][column[j]];
      const auto& var = schema.variables[j];
      if (is_missing_cell(cell)) {
        x.push_back(std::nullopt);
      } else if (var.kind == VariableKind::numerical) {
        auto v = parse_number(cell);
        if (!v) throw DataError("csv: row " + std::to_string(r + 1) + ", column '" + var.name + "' is not numeric");
        x.push_back(*v);
      } else {
        auto it = std::find(var.categories.begin(), var.categories.end(), cell);
        if (it == var.categories.end()) x.push_back(std::nullopt);
        else x.push_back(static_cast<double>(it - var.categories.begin()));
      }
    }
    ds.rows.push_back(std::move(x));
    if (target_col) {
      const auto& cell = records[r][*target_col];
      if (task == Task::regression) {
        auto v = parse_number(cell);
        if (!v) throw DataError("csv: row " + std::to_string(r + 1) + " target is not numeric");
        ds.targets.push_back(*v);
      } else {
        auto it = std::find(class_labels.begin(), class_labels.end(), cell);
        if (it == class_labels.end()) throw DataError("csv: row " + std::to_string(r + 1) + " has unknown class '" + cell + "'");
        ds.targets.push_back(static_cast<double>(it - class_labels.begin()));
      }
    }
  }
  ds.schema.n_obs = schema.n_obs;
  return ds;
}

}  // namespace rfz
