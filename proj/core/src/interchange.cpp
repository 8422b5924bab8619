#include "rfz/interchange.hpp"

#include <bit>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "rfz/errors.hpp"

namespace rfz {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_hex64(double value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(value)));
  return buf;
}

double from_hex64(std::string_view hex) {
  if (hex.size() != 16) throw std::invalid_argument("expected 16 hex digits");
  std::uint64_t bits = 0;
  for (char c : hex) {
    std::uint64_t digit;
    if (c >= '0' && c <= '9') digit = static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') digit = static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') digit = static_cast<std::uint64_t>(c - 'A' + 10);
    else throw std::invalid_argument("bad hex digit");
    bits = (bits << 4) | digit;
  }
  return std::bit_cast<double>(bits);
}

namespace {

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + ": missing field '" + key + "'");
  return *it;
}

const std::string& as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path + ": expected a string");
  return v.get_ref<const std::string&>();
}

std::uint64_t as_index(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw SchemaError(path + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double hex_real(const json& v, const std::string& path) {
  try {
    return from_hex64(as_string(v, path));
  } catch (const std::invalid_argument&) {
    throw SchemaError(path + ": expected 16 hex digits of a 64-bit pattern");
  }
}

class TreeReader {
 public:
  TreeReader(const Forest& forest, Tree& tree) : forest_(forest), tree_(tree) {}

  std::uint32_t read(const json& node, const std::string& path) {
    if (!node.is_object()) throw SchemaError(path + ": expected a node object");
    const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    Fit fit = read_fit(member(node, "fit", path), path + ".fit");
    tree_.nodes[index].fit = fit;

    const bool has_left = node.contains("left");
    const bool has_right = node.contains("right");
    const bool has_var = node.contains("var");
    const bool has_split = node.contains("split");
    if (!has_left && !has_right && !has_var && !has_split) return index;
    if (!(has_left && has_right && has_var && has_split))
      throw SchemaError(path + ": internal node needs var, split, left and right");

    auto var = as_index(node["var"], path + ".var");
    if (var >= forest_.schema.size()) throw InvariantError(path + ".var: variable index out of range");
    Split split = read_split(node["split"], forest_.schema.variables[var], path + ".split");
    tree_.nodes[index].variable = static_cast<std::uint32_t>(var);
    tree_.nodes[index].split = std::move(split);

    auto left = read(node["left"], path + ".left");
    auto right = read(node["right"], path + ".right");
    tree_.nodes[index].left = left;
    tree_.nodes[index].right = right;
    return index;
  }

 private:
  Fit read_fit(const json& v, const std::string& path) const {
    if (forest_.task == Task::classification) {
      auto label = as_index(v, path);
      if (label >= forest_.class_labels.size()) throw InvariantError(path + ": class label index out of range");
      return ClassLabel{static_cast<std::uint32_t>(label)};
    }
    return hex_real(v, path);
  }

  static Split read_split(const json& v, const Variable& var, const std::string& path) {
    if (!v.is_object()) throw SchemaError(path + ": expected an object");
    if (v.contains("threshold")) {
      if (var.kind != VariableKind::numerical)
        throw InvariantError(path + ": numerical threshold split on categorical variable '" + var.name + "'");
      return hex_real(v["threshold"], path + ".threshold");
    }
    if (v.contains("left_set")) {
      if (var.kind != VariableKind::categorical)
        throw InvariantError(path + ": categorical split on numerical variable '" + var.name + "'");
      try {
        return CategorySet::from_hex(as_string(v["left_set"], path + ".left_set"), var.categories.size());
      } catch (const std::invalid_argument& e) {
        throw InvariantError(path + ".left_set: " + e.what());
      }
    }
    throw SchemaError(path + ": split needs 'threshold' or 'left_set'");
  }

  const Forest& forest_;
  Tree& tree_;
};

VariableSchema read_schema(const json& v) {
  VariableSchema schema;
  if (auto it = v.find("n_obs"); it != v.end()) schema.n_obs = as_index(*it, "schema.n_obs");
  const auto& vars = member(v, "variables", "schema");
  if (!vars.is_array()) throw SchemaError("schema.variables: expected an array");
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto path = "schema.variables[" + std::to_string(j) + "]";
    Variable var;
    var.name = as_string(member(vars[j], "name", path), path + ".name");
    const auto& kind = as_string(member(vars[j], "kind", path), path + ".kind");
    if (kind == "numerical") {
      var.kind = VariableKind::numerical;
    } else if (kind == "categorical") {
      var.kind = VariableKind::categorical;
      const auto& cats = member(vars[j], "categories", path);
      if (!cats.is_array()) throw SchemaError(path + ".categories: expected an array");
      for (std::size_t c = 0; c < cats.size(); ++c)
        var.categories.push_back(as_string(cats[c], path + ".categories[" + std::to_string(c) + "]"));
    } else {
      throw SchemaError(path + ".kind: expected 'numerical' or 'categorical'");
    }
    schema.variables.push_back(std::move(var));
  }
  return schema;
}

ordered_json write_node(const Forest& forest, const Tree& tree, std::uint32_t i) {
  const Node& n = tree.nodes[i];
  ordered_json out;
  if (!n.is_leaf()) {
    out["var"] = n.variable;
    ordered_json split;
    if (const auto* threshold = std::get_if<double>(&n.split)) split["threshold"] = to_hex64(*threshold);
    else split["left_set"] = std::get<CategorySet>(n.split).to_hex();
    out["split"] = std::move(split);
  }
  if (forest.task == Task::classification) out["fit"] = std::get<ClassLabel>(n.fit).index;
  else out["fit"] = to_hex64(std::get<double>(n.fit));
  if (!n.is_leaf()) {
    out["left"] = write_node(forest, tree, n.left);
    out["right"] = write_node(forest, tree, n.right);
  }
  return out;
}

}  // namespace

Forest parse_forest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("not valid JSON: ") + e.what());
  }
  const auto& format = as_string(member(doc, "format", "$"), "format");
  if (format != kInterchangeFormat) throw SchemaError("format: unsupported '" + format + "'");

  Forest forest;
  forest.schema = read_schema(member(doc, "schema", "$"));
  validate(forest.schema);

  const auto& task = as_string(member(doc, "task", "$"), "task");
  if (task == "classification") forest.task = Task::classification;
  else if (task == "regression") forest.task = Task::regression;
  else throw SchemaError("task: expected 'classification' or 'regression'");

  if (forest.task == Task::classification) {
    const auto& labels = member(doc, "class_labels", "$");
    if (!labels.is_array()) throw SchemaError("class_labels: expected an array");
    for (std::size_t c = 0; c < labels.size(); ++c)
      forest.class_labels.push_back(as_string(labels[c], "class_labels[" + std::to_string(c) + "]"));
  }

  const auto& trees = member(doc, "trees", "$");
  if (!trees.is_array()) throw SchemaError("trees: expected an array");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    Tree tree;
    TreeReader(forest, tree).read(trees[t], "trees[" + std::to_string(t) + "]");
    forest.trees.push_back(std::move(tree));
  }
  validate(forest);
  return forest;
}

std::string serialize_forest(const Forest& forest) {
  ordered_json doc;
  doc["format"] = kInterchangeFormat;
  ordered_json schema;
  schema["n_obs"] = forest.schema.n_obs;
  auto vars = ordered_json::array();
  for (const auto& v : forest.schema.variables) {
    ordered_json var;
    var["name"] = v.name;
    var["kind"] = to_string(v.kind);
    if (v.kind == VariableKind::categorical) var["categories"] = v.categories;
    vars.push_back(std::move(var));
  }
  schema["variables"] = std::move(vars);
  doc["schema"] = std::move(schema);
  doc["task"] = to_string(forest.task);
  if (forest.task == Task::classification) doc["class_labels"] = forest.class_labels;
  auto trees = ordered_json::array();
  for (const auto& tree : forest.trees) trees.push_back(write_node(forest, tree, 0));
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

}  // namespace rfz
