#include <benchmark/benchmark.h>

#include <random>

#include "generators.hpp"
#include "rfz/container.hpp"
#include "rfz/huffman.hpp"
#include "rfz/lzw.hpp"
#include "rfz/trainer.hpp"
#include "rfz/zaks.hpp"

using namespace rfz;

namespace {

const Forest& iris_forest() {
  static const Forest f = train(testing::iris_like(1), {.n_trees = 200, .seed = 1});
  return f;
}

void BM_ZaksRoundTrip(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto tree = testing::random_shape(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(zaks_decode(zaks_encode(tree)));
  state.SetItemsProcessed(state.iterations() * (2 * state.range(0) + 1));
}
BENCHMARK(BM_ZaksRoundTrip)->Arg(16)->Arg(1024);

void BM_HuffmanDecode(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::geometric_distribution<std::uint32_t> geo(0.2);
  std::vector<std::uint32_t> symbols(100000);
  EmpiricalDistribution d(64);
  for (auto& s : symbols) d.add(s = std::min<std::uint32_t>(geo(rng), 63));
  const auto table = HuffmanTable::build(d);
  const auto bits = table.encode(symbols);
  for (auto _ : state) benchmark::DoNotOptimize(table.decode(bits, symbols.size()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(symbols.size()));
}
BENCHMARK(BM_HuffmanDecode);

void BM_Lzw(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> data(1 << 16);
  for (auto& b : data) b = static_cast<std::uint8_t>(testing::below(rng, 4) == 0 ? rng() : 0x55);
  for (auto _ : state) benchmark::DoNotOptimize(lzw::decompress(lzw::compress(data), data.size()));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Lzw);

void BM_Compress(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(compress(iris_forest()).serialize());
}
BENCHMARK(BM_Compress)->Unit(benchmark::kMillisecond);

void BM_Decompress(benchmark::State& state) {
  const auto bytes = compress(iris_forest()).serialize();
  for (auto _ : state) benchmark::DoNotOptimize(decompress(CompressedContainer::parse(bytes)));
}
BENCHMARK(BM_Decompress)->Unit(benchmark::kMillisecond);

void BM_PredictCompressed(benchmark::State& state) {
  const auto c = compress(iris_forest());
  const Observation x{5.8, 2.7, 4.1, 1.2};
  for (auto _ : state) benchmark::DoNotOptimize(predict_compressed(c, x));
}
BENCHMARK(BM_PredictCompressed)->Unit(benchmark::kMicrosecond);

void BM_PredictPlain(benchmark::State& state) {
  const Observation x{5.8, 2.7, 4.1, 1.2};
  for (auto _ : state) benchmark::DoNotOptimize(predict(iris_forest(), x));
}
BENCHMARK(BM_PredictPlain)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
