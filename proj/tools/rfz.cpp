#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfz/baseline.hpp"
#include "rfz/container.hpp"
#include "rfz/dataset.hpp"
#include "rfz/errors.hpp"
#include "rfz/interchange.hpp"
#include "rfz/lossy.hpp"
#include "rfz/trainer.hpp"

using namespace rfz;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::string& path) {
  const auto b = read_bytes(path);
  return {b.begin(), b.end()};
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool is_container(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "RFZ1");
}

std::string shortest(double v) {
  char buf[64];
  return {buf, std::to_chars(buf, buf + sizeof buf, v).ptr};
}

std::string fit_text(const Fit& y, const std::vector<std::string>& labels) {
  if (const auto* c = std::get_if<ClassLabel>(&y)) return csv_escape(labels.at(c->index));
  return shortest(std::get<double>(y));
}

// Observations for a schema; the target column, when present, is the named
// one or else the first column that is not a variable.
Dataset load_observations(const std::string& path, const VariableSchema& schema, Task task,
                          const std::vector<std::string>& labels, std::optional<std::string> target) {
  const auto text = read_text(path);
  if (!target) {
    std::istringstream head(text);
    const auto rows = parse_csv(head);
    if (!rows.empty())
      for (const auto& name : rows[0])
        if (std::none_of(schema.variables.begin(), schema.variables.end(),
                         [&](const Variable& v) { return v.name == name; })) {
          target = name;
          break;
        }
  }
  std::istringstream in(text);
  return read_observations(in, schema, task, labels, target);
}

int exit_code_for(const Error& e) {
  const std::string cls = e.error_class();
  return cls == "CorruptContainer" || cls == "MalformedSequence" || cls == "TruncatedStream" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfz: lossless and lossy compression of random forests"};
  app.require_subcommand(1);

  // train
  std::string train_csv, out_path, target, task_name, schema_path;
  TrainConfig tc;
  bool no_bootstrap = false;
  auto* train_cmd = app.add_subcommand("train", "Train a forest on a CSV table");
  train_cmd->add_option("data", train_csv, "Training CSV")->required();
  train_cmd->add_option("-o,--output", out_path, "Forest JSON")->required();
  train_cmd->add_option("--trees", tc.n_trees, "Number of trees")->capture_default_str();
  train_cmd->add_option("--seed", tc.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--min-leaf", tc.min_leaf, "Minimum in-bag observations per child")->capture_default_str();
  train_cmd->add_option("--mtry", tc.mtry, "Variables tried per split (0: default)")->capture_default_str();
  train_cmd->add_option("--max-depth", tc.max_depth, "Depth limit (0: none)")->capture_default_str();
  train_cmd->add_flag("--no-bootstrap", no_bootstrap, "Train every tree on all rows");
  train_cmd->add_option("--target", target, "Target column (default: last)");
  train_cmd->add_option("--task", task_name, "classification or regression (default: inferred)")
      ->check(CLI::IsMember({"classification", "regression"}));
  train_cmd->add_option("--schema", schema_path, "Sidecar JSON listing categorical columns");

  // compress
  std::string in_path, fit_coder_name = "auto";
  CompressOptions co;
  bool json = false;
  auto* compress_cmd = app.add_subcommand("compress", "Compress a forest JSON into a container");
  compress_cmd->add_option("forest", in_path, "Forest JSON")->required();
  compress_cmd->add_option("-o,--output", out_path, "Container file")->required();
  compress_cmd->add_option("--kmax", co.k_max, "Largest cluster count tried")->capture_default_str();
  compress_cmd->add_option("--seed", co.seed, "Clustering seed")->capture_default_str();
  compress_cmd->add_option("--restarts", co.restarts, "Clustering restarts")->capture_default_str();
  compress_cmd->add_option("--fit-coder", fit_coder_name, "auto, huffman or arithmetic")->capture_default_str();
  compress_cmd->add_flag("--json", json, "Size report as JSON");

  // decompress
  auto* decompress_cmd = app.add_subcommand("decompress", "Restore the forest JSON from a container");
  decompress_cmd->add_option("container", in_path, "Container file")->required();
  decompress_cmd->add_option("-o,--output", out_path, "Forest JSON")->required();

  // predict
  std::string data_path;
  auto* predict_cmd = app.add_subcommand("predict", "Predict from a container or forest JSON");
  predict_cmd->add_option("model", in_path, "Container or forest JSON")->required();
  predict_cmd->add_option("data", data_path, "CSV with the forest's variables as columns")->required();
  predict_cmd->add_option("-o,--output", out_path, "Predictions CSV (default: stdout)");

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "Size breakdown of a container");
  inspect_cmd->add_option("container", in_path, "Container file")->required();
  inspect_cmd->add_flag("--json", json, "JSON output");

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "Size of the DEFLATE-compressed light representation");
  baseline_cmd->add_option("forest", in_path, "Forest JSON")->required();
  baseline_cmd->add_option("-o,--output", out_path, "Write the deflated bytes here");
  baseline_cmd->add_flag("--json", json, "JSON output");

  // lossy
  LossyPlan plan;
  unsigned fit_bits = 0;
  std::vector<double> fit_range;
  std::string eval_path, sweep;
  std::vector<double> sweep_values;
  bool conservative = false;
  auto* lossy_cmd = app.add_subcommand("lossy", "Subsample trees and quantize fits, then compress");
  lossy_cmd->add_option("forest", in_path, "Forest JSON")->required();
  lossy_cmd->add_option("-o,--output", out_path, "Container file (not used with --sweep)");
  lossy_cmd->add_option("--sample-trees", plan.sample_size, "Trees kept (0: all)")->capture_default_str();
  lossy_cmd->add_option("--fit-bits", fit_bits, "Quantizer bits for regression fits (0: exact)")
      ->check(CLI::Range(0u, 64u));
  lossy_cmd->add_option("--fit-range", fit_range, "Quantizer range LO HI")->expected(2);
  lossy_cmd->add_option("--seed", plan.seed, "Sampling seed")->capture_default_str();
  lossy_cmd->add_option("--eval", eval_path, "Evaluation CSV (with the target column)");
  lossy_cmd->add_option("--target", target, "Target column of the evaluation CSV");
  lossy_cmd->add_flag("--conservative", conservative, "Use the largest per-observation variance");
  lossy_cmd->add_option("--sweep", sweep, "Emit CSV over fit bits or tree counts")
      ->check(CLI::IsMember({"bits", "trees"}));
  lossy_cmd->add_option("--sweep-values", sweep_values, "Values swept (default 1..16 bits or a tree ladder)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      std::ifstream in(train_csv);
      if (!in) throw IoError("cannot open " + train_csv);
      CsvOptions opts;
      if (!target.empty()) opts.target = target;
      if (!task_name.empty()) opts.task = task_name == "classification" ? Task::classification : Task::regression;
      if (!schema_path.empty()) opts.schema_json = read_text(schema_path);
      const auto data = read_dataset(in, opts);
      tc.bootstrap = !no_bootstrap;
      write_text(out_path, serialize_forest(train(data, tc)));
    } else if (*compress_cmd) {
      co.fit_coder = parse_fit_coder(fit_coder_name);
      const auto bytes = compress(parse_forest(read_text(in_path)), co).serialize();
      write_bytes(out_path, bytes);
      const auto r = inspect(bytes);
      std::cout << (json ? r.to_json() : r.to_text()) << '\n';
    } else if (*decompress_cmd) {
      write_text(out_path, serialize_forest(decompress(CompressedContainer::parse(read_bytes(in_path)))));
    } else if (*predict_cmd) {
      const auto bytes = read_bytes(in_path);
      std::optional<CompressedContainer> c;
      std::optional<Forest> f;
      if (is_container(bytes)) c = CompressedContainer::parse(bytes);
      else f = parse_forest(std::string(bytes.begin(), bytes.end()));
      const auto& schema = c ? c->schema : f->schema;
      const auto& labels = c ? c->class_labels : f->class_labels;
      const auto task = c ? c->task : f->task;
      std::ifstream in(data_path);
      if (!in) throw IoError("cannot open " + data_path);
      const auto obs = read_observations(in, schema, task, labels);
      std::ostringstream out;
      out << "prediction\n";
      for (const auto& x : obs.rows) out << fit_text(c ? predict_compressed(*c, x) : predict(*f, x), labels) << '\n';
      if (out_path.empty()) std::cout << out.str();
      else write_text(out_path, out.str());
    } else if (*inspect_cmd) {
      const auto r = inspect(read_bytes(in_path));
      std::cout << (json ? r.to_json() : r.to_text()) << '\n';
    } else if (*baseline_cmd) {
      const auto b = light_baseline(parse_forest(read_text(in_path)));
      if (!out_path.empty()) write_bytes(out_path, b.bytes);
      if (json)
        std::cout << "{\"raw\": " << b.raw_size << ", \"deflated\": " << b.size() << "}\n";
      else
        std::cout << "light representation " << b.raw_size << " B, deflated " << b.size() << " B\n";
    } else if (*lossy_cmd) {
      const auto forest = parse_forest(read_text(in_path));
      if (fit_bits > 0) plan.fit_bits = fit_bits;
      if (!fit_range.empty()) plan.fit_range = std::pair(fit_range[0], fit_range[1]);
      std::optional<Dataset> eval;
      if (!eval_path.empty())
        eval = load_observations(eval_path, forest.schema, forest.task, forest.class_labels,
                                 target.empty() ? std::nullopt : std::optional(target));
      const auto mode = conservative ? SigmaMode::max : SigmaMode::mean;
      const Dataset* ev = eval ? &*eval : nullptr;
      if (!sweep.empty()) {
        if (sweep == "bits") {
          std::vector<unsigned> bits;
          for (double v : sweep_values) bits.push_back(static_cast<unsigned>(v));
          if (bits.empty())
            for (unsigned b = 1; b <= 16; ++b) bits.push_back(b);
          std::cout << sweep_csv(sweep_fit_bits(forest, bits, plan, {}, ev), "fit_bits");
        } else {
          std::vector<std::size_t> sizes;
          for (double v : sweep_values) sizes.push_back(static_cast<std::size_t>(v));
          if (sizes.empty()) {
            for (std::size_t s : {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000})
              if (s < forest.tree_count()) sizes.push_back(s);
            sizes.push_back(forest.tree_count());
          }
          std::cout << sweep_csv(sweep_sample_sizes(forest, sizes, plan, {}, ev), "trees");
        }
      } else {
        if (out_path.empty()) throw UsageError("lossy needs -o unless --sweep is given");
        const auto [c, report] = lossy_compress(forest, plan, {}, ev, mode);
        write_bytes(out_path, c.serialize());
        std::cout << report.to_json() << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.error_class() << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const IoError& e) {
    std::cerr << "error: IoError: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
