/* Microbenchmarks for the hot paths: codebook solves, quantization,
 * estimation, rotation, packing, and the exhaustive search scan.
 *
 *   ./tbq_bench [--benchmark_filter=...]
 */

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "tbq/codebook.hpp"
#include "tbq/eval.hpp"
#include "tbq/nn_search.hpp"
#include "tbq/packing.hpp"
#include "tbq/quantizer.hpp"
#include "tbq/rotation.hpp"

namespace {

constexpr int kDim = 1024;

const Eigen::MatrixXd& bench_vectors() {
  static const Eigen::MatrixXd vecs = tbq::gaussian_matrix(kDim, 64, 1);
  return vecs;
}

void BM_BuildCodebook(benchmark::State& state) {
  const int b = int(state.range(0));
  for (auto _ : state) {
    const tbq::Codebook cb =
        tbq::build_codebook(tbq::SourcePdf::std_gaussian(), b);
    benchmark::DoNotOptimize(cb.cost);
  }
}
BENCHMARK(BM_BuildCodebook)->Arg(2)->Arg(4)->Arg(6)
    ->Unit(benchmark::kMillisecond);

void BM_GenerateRotation(benchmark::State& state) {
  const int d = int(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    const tbq::Rotation rot = tbq::generate_rotation(++seed, d);
    benchmark::DoNotOptimize(rot.matrix().data());
  }
}
BENCHMARK(BM_GenerateRotation)->Arg(128)->Arg(1024)
    ->Unit(benchmark::kMillisecond);

void BM_RotationApply(benchmark::State& state) {
  const tbq::Rotation rot = tbq::generate_rotation(3, kDim);
  const Eigen::VectorXd x = bench_vectors().col(0);
  Eigen::VectorXd y(kDim);
  for (auto _ : state) {
    y = rot.apply(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()));
}
BENCHMARK(BM_RotationApply)->Unit(benchmark::kMicrosecond);

void BM_QuantMse(benchmark::State& state) {
  const int b = int(state.range(0));
  const tbq::MseQuantizer q(kDim, b, 5);
  const Eigen::VectorXd x = bench_vectors().col(1);
  const std::span<const double> xs(x.data(), size_t(kDim));
  for (auto _ : state) {
    const tbq::QuantizedVecMse code = tbq::quant_mse(q, xs);
    benchmark::DoNotOptimize(code.norm);
  }
}
BENCHMARK(BM_QuantMse)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_DequantMse(benchmark::State& state) {
  const tbq::MseQuantizer q(kDim, 4, 5);
  const Eigen::VectorXd x = bench_vectors().col(1);
  const tbq::QuantizedVecMse code =
      tbq::quant_mse(q, std::span<const double>(x.data(), size_t(kDim)));
  for (auto _ : state) {
    const std::vector<double> rec = tbq::dequant_mse(q, code);
    benchmark::DoNotOptimize(rec.data());
  }
}
BENCHMARK(BM_DequantMse)->Unit(benchmark::kMicrosecond);

void BM_QuantProd(benchmark::State& state) {
  const int b = int(state.range(0));
  const tbq::ProdQuantizer q(kDim, b, 7);
  const Eigen::VectorXd x = bench_vectors().col(2);
  const std::span<const double> xs(x.data(), size_t(kDim));
  for (auto _ : state) {
    const tbq::QuantizedVecProd code = tbq::quant_prod(q, xs);
    benchmark::DoNotOptimize(code.gamma);
  }
}
BENCHMARK(BM_QuantProd)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_InnerEstimateProd(benchmark::State& state) {
  const tbq::ProdQuantizer q(kDim, 4, 7);
  const Eigen::VectorXd x = bench_vectors().col(2);
  const Eigen::VectorXd y = bench_vectors().col(3);
  const tbq::QuantizedVecProd code =
      tbq::quant_prod(q, std::span<const double>(x.data(), size_t(kDim)));
  const Eigen::VectorXd yr = q.mse_stage().rotation().apply(y);
  const Eigen::VectorXd sy = q.sketch().matrix_f64() * y;
  for (auto _ : state) {
    const double est = tbq::inner_estimate_prod(
        q, code, std::span<const double>(yr.data(), size_t(kDim)),
        std::span<const double>(sy.data(), size_t(q.width())));
    benchmark::DoNotOptimize(est);
  }
}
BENCHMARK(BM_InnerEstimateProd)->Unit(benchmark::kMicrosecond);

void BM_PackUnpack(benchmark::State& state) {
  const int b = int(state.range(0));
  std::vector<uint32_t> codes(kDim);
  for (size_t i = 0; i < codes.size(); ++i)
    codes[i] = uint32_t(i) & ((1u << b) - 1u);
  for (auto _ : state) {
    const tbq::PackedCodes packed = tbq::pack_indices(codes, b);
    const std::vector<uint32_t> back = tbq::unpack_indices(packed);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_PackUnpack)->Arg(1)->Arg(4)->Arg(8)
    ->Unit(benchmark::kMicrosecond);

void BM_SearchScan(benchmark::State& state) {
  const int d = 128;
  const size_t n = 10000;
  static const tbq::QuantizedIndex index = tbq::build_index(
      tbq::gaussian_matrix(d, n, 9), tbq::QuantMode::PROD, 4, 11);
  const Eigen::VectorXd q = tbq::gaussian_matrix(d, 1, 13).col(0);
  for (auto _ : state) {
    const tbq::SearchResult res = tbq::search(index, q, 10);
    benchmark::DoNotOptimize(res.ids.data());
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(n));
}
BENCHMARK(BM_SearchScan)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
