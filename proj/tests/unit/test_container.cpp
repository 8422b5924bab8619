#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "generators.hpp"
#include "rfz/container.hpp"
#include "rfz/errors.hpp"
#include "rfz/interchange.hpp"
#include "rfz/trainer.hpp"

using namespace rfz;

namespace {

Forest fixture(const char* name) {
  std::ifstream in(std::string(RFZ_FIXTURES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_forest(ss.str());
}

Forest round_trip(const Forest& f, const CompressOptions& opts = {}) {
  const auto bytes = compress(f, opts).serialize();
  return decompress(CompressedContainer::parse(bytes));
}

bool same_prediction(const Fit& a, const Fit& b) { return same_fit(a, b); }

}  // namespace

TEST_CASE("fixtures round trip") {
  for (const char* name : {"two_tree_depth2.json", "regression_small.json"}) {
    CAPTURE(name);
    const auto f = fixture(name);
    CHECK(identical(round_trip(f), f));
  }
}

TEST_CASE("a single-leaf regression forest round trips") {
  Forest f;
  f.schema.variables = {{"x", VariableKind::numerical, {}}};
  f.task = Task::regression;
  Tree t;
  t.nodes.resize(1);
  t.nodes[0].fit = 0.1;
  f.trees = {t};
  const auto c = compress(f);
  CHECK(c.max_depth == 0);
  const auto back = decompress(CompressedContainer::parse(c.serialize()));
  CHECK(identical(back, f));
  CHECK(std::get<double>(predict_compressed(c, Observation{std::nullopt})) == 0.1);
}

TEST_CASE("random forests round trip exactly, in both fit coders") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 40; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 40, .max_depth = 14});
    CompressOptions opts;
    opts.seed = i;
    CHECK(identical(round_trip(f, opts), f));
  }
  for (int i = 0; i < 20; ++i) {
    auto f = testing::random_forest(rng, {.max_trees = 30, .max_depth = 10, .task = Task::classification});
    f.class_labels = {"no", "yes"};
    for (auto& t : f.trees)
      for (auto& n : t.nodes) std::get<ClassLabel>(n.fit).index %= 2;
    for (auto coder : {FitCoder::huffman, FitCoder::arithmetic}) {
      const auto c = compress(f, {.fit_coder = coder});
      CHECK(c.fit_coder == coder);
      CHECK(identical(decompress(CompressedContainer::parse(c.serialize())), f));
    }
    CHECK(compress(f).fit_coder == FitCoder::arithmetic);
  }
}

TEST_CASE("awkward values survive bit-exactly") {
  const double base[] = {0.0, -0.0, 5e-324, 2.2250738585072014e-308, 1.7976931348623157e308, -1.7976931348623157e308,
                         0.1, 0.30000000000000004, 5.2, std::nextafter(5.2, 0.0), std::nextafter(5.2, 10.0),
                         9007199254740993.0, 1e300, -1e-300, 123456.789, 0.1 + 0.2 - 0.3};
  auto make = [](std::vector<double> fits, double threshold) {
    Forest f;
    f.schema.variables = {{"x", VariableKind::numerical, {}}};
    f.task = Task::regression;
    for (double v : fits) {
      Tree t;
      t.nodes.resize(3);
      t.nodes[0].variable = 0;
      t.nodes[0].split = threshold;
      t.nodes[0].left = 1;
      t.nodes[0].right = 2;
      t.nodes[0].fit = v;
      t.nodes[1].fit = v;
      t.nodes[2].fit = -v;
      f.trees.push_back(t);
    }
    return f;
  };
  for (double threshold : base) {
    if (threshold == 0 && std::signbit(threshold)) continue;  // -0 and +0 split identically
    const auto f = make(std::vector<double>(std::begin(base), std::end(base)), threshold);
    CHECK(identical(round_trip(f), f));
  }
  // a short-decimal table, one with near-misses, and a sparse wide one
  std::mt19937_64 rng(47);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> fits;
    for (int k = 0; k < 20; ++k) {
      double v = static_cast<double>(testing::below(rng, 2000)) / 100.0 - 10.0;
      if (i % 3 == 1) v = std::nextafter(v, testing::below(rng, 2) ? 100.0 : -100.0);
      if (i % 3 == 2) v = testing::normal(rng) * std::pow(10.0, static_cast<double>(testing::below(rng, 40)) - 20);
      fits.push_back(v);
    }
    const auto f = make(fits, fits[0]);
    CHECK(identical(round_trip(f), f));
  }
}

TEST_CASE("arithmetic fit coding needs two classes") {
  const auto f = fixture("regression_small.json");
  CHECK_THROWS_AS(compress(f, {.fit_coder = FitCoder::arithmetic}), UsageError);
  CHECK(compress(f).fit_coder == FitCoder::huffman);
  CHECK(parse_fit_coder("arithmetic") == FitCoder::arithmetic);
  CHECK(parse_fit_coder("auto") == FitCoder::automatic);
  CHECK_THROWS_AS(parse_fit_coder("zip"), UsageError);
}

TEST_CASE("compressed prediction matches the decompressed forest") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 30; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 25, .max_depth = 12, .missing_rate = 0.2});
    const auto c = CompressedContainer::parse(compress(f).serialize());
    for (int k = 0; k < 30; ++k) {
      const auto x = testing::random_observation(rng, f, 0.2);
      CHECK(same_prediction(predict_compressed(c, x), predict(f, x)));
    }
  }
}

TEST_CASE("prediction visits every tree once, in order") {
  const auto f = train(testing::iris_like(1), {.n_trees = 100, .seed = 4});
  const auto c = compress(f);
  AccessStats stats;
  const auto y = predict_compressed(c, Observation{5.8, 2.7, 4.1, 1.2}, &stats);
  CHECK(same_prediction(y, predict(f, Observation{5.8, 2.7, 4.1, 1.2})));
  CHECK(stats.trees_touched == 100);
  REQUIRE(stats.trees.size() == 100);
  for (std::uint32_t t = 0; t < 100; ++t) CHECK(stats.trees[t] == t);
  CHECK(stats.frames_decoded == c.structure.frames.size());
}

TEST_CASE("observation errors surface before decoding") {
  const auto c = compress(fixture("two_tree_depth2.json"));
  CHECK_THROWS_AS(predict_compressed(c, Observation{1.0}), DimensionError);
  CHECK_THROWS_AS(predict_compressed(c, Observation{1.0, 1.0, 7.0}), TypeError);
}

TEST_CASE("serialization is canonical and deterministic") {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 20; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 20});
    const auto a = compress(f, {.seed = 5}).serialize();
    CHECK(compress(f, {.seed = 5}).serialize() == a);
    const auto parsed = CompressedContainer::parse(a);
    CHECK(parsed.serialize() == a);
    CHECK(parsed == compress(f, {.seed = 5}));
  }
}

TEST_CASE("header and trailing bytes") {
  const auto f = fixture("two_tree_depth2.json");
  auto bytes = compress(f).serialize();
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "RFZ1");
  CHECK(bytes[4] == kContainerVersion);

  auto extended = bytes;
  extended.insert(extended.end(), {0xDE, 0xAD, 0xBE, 0xEF});
  CHECK(identical(decompress(CompressedContainer::parse(extended)), f));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(CompressedContainer::parse(bad_magic), CorruptContainer);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(CompressedContainer::parse(bad_version), CorruptContainer);
}

TEST_CASE("every truncation is reported as a corrupt container") {
  std::mt19937_64 rng(44);
  const auto f = testing::random_forest(rng, {.max_trees = 10, .max_depth = 8});
  const auto bytes = compress(f).serialize();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CAPTURE(n);
    CHECK_THROWS_AS(CompressedContainer::parse(std::span(bytes).first(n)), CorruptContainer);
  }
}

TEST_CASE("random corruption never escapes as anything but a library error") {
  std::mt19937_64 rng(45);
  const auto f = testing::random_forest(rng, {.max_trees = 10, .max_depth = 8});
  const auto bytes = compress(f).serialize();
  for (int i = 0; i < 500; ++i) {
    auto b = bytes;
    b[testing::below(rng, b.size())] ^= static_cast<std::uint8_t>(1 + testing::below(rng, 255));
    try {
      const auto c = CompressedContainer::parse(b);
      decompress(c);
    } catch (const CorruptContainer&) {
    } catch (const Error& e) {
      FAIL("unexpected " << e.error_class() << ": " << e.what());
    }
  }
}

TEST_CASE("size report adds up") {
  std::mt19937_64 rng(46);
  for (int i = 0; i < 20; ++i) {
    const auto f = testing::random_forest(rng, {.max_trees = 30});
    const auto bytes = compress(f).serialize();
    const auto r = inspect(bytes);
    CHECK(r.total == bytes.size());
    CHECK(r.trees == f.tree_count());
    CHECK(r.structure + r.names + r.splits + r.fits + r.dictionary ==
          doctest::Approx(static_cast<double>(r.total - kHeaderBytes - kSectionTableBytes)));
    CHECK(r.split_clusters.size() == f.schema.size());
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["total"] == r.total);
    CHECK(r.to_text().find("structure") != std::string::npos);
  }
}

TEST_CASE("compression beats raw interchange on a trained forest") {
  const auto f = train(testing::iris_like(2), {.n_trees = 200, .seed = 1});
  const auto bytes = compress(f).serialize();
  CHECK(bytes.size() * 10 < serialize_forest(f).size());
  const auto r = inspect(bytes);
  CHECK(r.fit_coder == "huffman");
  CHECK(r.name_clusters >= 1);
}
