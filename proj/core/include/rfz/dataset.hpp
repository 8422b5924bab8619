#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "rfz/forest.hpp"

namespace rfz {

/// Observations plus targets. Classification targets hold class indices
/// into `class_labels`.
struct Dataset {
  VariableSchema schema;
  Task task = Task::regression;
  std::vector<std::string> class_labels;
  std::string target_name;
  std::vector<Observation> rows;
  std::vector<double> targets;

  std::size_t size() const noexcept { return rows.size(); }
};

/// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::string csv_escape(std::string_view field);

struct CsvOptions {
  std::optional<std::string> target;       // default: last column
  std::optional<Task> task;                // default: inferred from the target column
  std::optional<std::string> schema_json;  // sidecar: {"categorical": ["col", ...]}
};

/// Reads a training table. Columns whose values are not all numeric are
/// categorical (categories in order of first appearance), as are columns
/// the sidecar lists. Empty cells, "NA" and "?" are missing.
/// Throws DataError on empty tables, ragged rows or a missing target.
Dataset read_dataset(std::istream& in, const CsvOptions& opts = {});

/// Reads observations for an existing schema, matching columns by name;
/// other columns are ignored. A column named `target` (if given and present)
/// is returned as targets when it parses under the forest's task.
/// Unknown category names are treated as missing.
Dataset read_observations(std::istream& in, const VariableSchema& schema, Task task,
                          const std::vector<std::string>& class_labels,
                          const std::optional<std::string>& target = std::nullopt);

bool is_missing_cell(std::string_view cell) noexcept;
std::optional<double> parse_number(std::string_view cell) noexcept;

}  // namespace rfz
