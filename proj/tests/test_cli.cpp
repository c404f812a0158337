#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tbq/codebook.hpp"
#include "tbq/eval.hpp"
#include "tbq/index_io.hpp"
#include "tbq/nn_search.hpp"

using namespace tbq;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::filesystem::path workspace() {
  const auto dir = std::filesystem::temp_directory_path() / "tbq_cli_ws";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return {};
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

/* Runs the CLI under test (path from the TBQ_CLI environment variable set
 * by the test harness) and captures exit code, stdout and stderr. */
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const char* cli = std::getenv("TBQ_CLI");
  REQUIRE_MESSAGE(cli != nullptr,
                  "TBQ_CLI must point at the tbq binary (set by ctest)");
  const auto out_path = workspace() / "stdout.txt";
  const auto err_path = workspace() / "stderr.txt";
  std::string cmd = env;
  if (!env.empty()) cmd += ' ';
  cmd += '"';
  cmd += cli;
  cmd += "\" " + args + " >" + out_path.string() + " 2>" + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

/* Extracts the first number following "<key> " or "<key>" in the text. */
double value_after(const std::string& text, const std::string& key) {
  const size_t pos = text.find(key);
  REQUIRE_MESSAGE(pos != std::string::npos, "missing key: ", key);
  std::istringstream in(text.substr(pos + key.size()));
  double v = 0.0;
  in >> v;
  REQUIRE(in);
  return v;
}

const std::string kVecs = (workspace() / "data.fvecs").string();
const std::string kQueries = (workspace() / "queries.fvecs").string();

void write_inputs() {
  static bool done = false;
  if (done) return;
  write_fvecs(kVecs, gaussian_matrix(32, 300, 2024));
  write_fvecs(kQueries, gaussian_matrix(32, 20, 2025));
  done = true;
}

}  // namespace

TEST_CASE("no subcommand and bad flags are usage errors (exit 2)") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("codebook --bits 9").code == 2);
  CHECK(run_cli("codebook --bits 9").err.find("usage error") !=
        std::string::npos);
  CHECK(run_cli("eval --trials 0").code == 2);
  CHECK(run_cli("eval --bits 9").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("--help").out.find("codebook") != std::string::npos);
}

TEST_CASE("codebook: prints centroids, cost, bound; caches to JSON") {
  const RunResult r1 = run_cli("codebook --bits 1");
  CHECK(r1.code == 0);
  CHECK(r1.out.find("config: subcommand=codebook") != std::string::npos);
  CHECK(r1.out.find("0.79788") != std::string::npos);   // +/- sqrt(2/pi)
  CHECK(r1.out.find("-0.79788") != std::string::npos);
  CHECK(value_after(r1.out, "cost: ") == doctest::Approx(0.3634).epsilon(1e-3));

  const RunResult r0 = run_cli("codebook --bits 0");
  CHECK(r0.code == 0);
  CHECK(value_after(r0.out, "cost: ") == doctest::Approx(1.0).epsilon(1e-4));

  // d = 3 sphere coordinate is uniform: cost is exactly 4^-b.
  const RunResult r3 = run_cli("codebook --bits 2 --dim 3");
  CHECK(r3.code == 0);
  CHECK(value_after(r3.out, "cost: ") ==
        doctest::Approx(0.0625).epsilon(1e-5));

  const std::string cache = (workspace() / "cb.json").string();
  const RunResult rc = run_cli("codebook --bits 3 --out " + cache);
  CHECK(rc.code == 0);
  const Codebook cb = load_codebook_cache(cache);
  CHECK(cb.b == 3);
  CHECK(cb.centroids.size() == 8);
}

TEST_CASE("quantize: deterministic index files with logged compression") {
  write_inputs();
  const std::string idx1 = (workspace() / "a.tbq").string();
  const std::string idx2 = (workspace() / "b.tbq").string();
  const std::string flags =
      " --mode mse --bits 4 --seed 7 --input " + kVecs;
  const RunResult r1 = run_cli("quantize" + flags + " --output " + idx1);
  CHECK(r1.code == 0);
  CHECK(r1.out.find("read: 300 vectors of dim 32") != std::string::npos);
  // d=32, b=4: record 16+4 bytes vs 128 raw = 6.4x.
  CHECK(value_after(r1.out, "compression_ratio: ") ==
        doctest::Approx(6.4).epsilon(1e-9));

  const RunResult r2 = run_cli("quantize" + flags + " --output " + idx2);
  CHECK(r2.code == 0);
  CHECK(slurp(idx1) == slurp(idx2));
  CHECK(!slurp(idx1).empty());

  const QuantizedIndex loaded = load_index(idx1);
  CHECK(loaded.size() == 300);
  CHECK(loaded.header().b == 4);
}

TEST_CASE("quantize prod mode records the sketch width") {
  write_inputs();
  const std::string idx = (workspace() / "p.tbq").string();
  const RunResult r = run_cli("quantize --mode prod --bits 3 --sketch 64 "
                              "--seed 7 --input " +
                              kVecs + " --output " + idx);
  CHECK(r.code == 0);
  const QuantizedIndex loaded = load_index(idx);
  CHECK(loaded.header().mode == QuantMode::PROD);
  CHECK(loaded.header().m == 64);
  CHECK(loaded.prod_quantizer.has_value());
}

TEST_CASE("dequantize: roundtrip statistics against the reference") {
  write_inputs();
  const std::string idx = (workspace() / "a.tbq").string();
  const std::string rec = (workspace() / "rec.fvecs").string();
  REQUIRE(run_cli("quantize --mode mse --bits 4 --seed 7 --input " + kVecs +
                  " --output " + idx)
              .code == 0);
  const RunResult r = run_cli("dequantize --index " + idx + " --output " +
                              rec + " --reference " + kVecs);
  CHECK(r.code == 0);
  CHECK(r.out.find("reconstructed: 300 vectors of dim 32") !=
        std::string::npos);
  // 4-bit relative reconstruction error is near the 0.0095 codebook cost.
  const double rel = value_after(r.out, "relative_mse_mean: ");
  CHECK(rel > 0.0);
  CHECK(rel < 0.05);
  const Eigen::MatrixXd back = read_fvecs(rec);
  CHECK(back.rows() == 32);
  CHECK(back.cols() == 300);
}

TEST_CASE("search: csv output with k rows per query") {
  write_inputs();
  const std::string idx = (workspace() / "a.tbq").string();
  REQUIRE(run_cli("quantize --mode mse --bits 4 --seed 7 --input " + kVecs +
                  " --output " + idx)
              .code == 0);
  const std::string res_path = (workspace() / "results.csv").string();
  const RunResult r = run_cli("search --index " + idx + " --queries " +
                              kQueries + " -k 3 --output " + res_path);
  CHECK(r.code == 0);
  std::ifstream in(res_path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "query,rank,id,score");
  size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 20 * 3);
}

TEST_CASE("recall: missing ground truth falls back to the exact oracle") {
  write_inputs();
  const std::string idx = (workspace() / "p8.tbq").string();
  REQUIRE(run_cli("quantize --mode mse --bits 8 --seed 7 --input " + kVecs +
                  " --output " + idx)
              .code == 0);
  const std::string out = (workspace() / "recall.csv").string();
  const RunResult r =
      run_cli("recall --index " + idx + " --queries " + kQueries +
              " --dataset " + kVecs + " --k-list 1,5 --output " + out);
  CHECK(r.code == 0);
  CHECK(r.err.find("exact scan oracle") != std::string::npos);
  CHECK(r.out.find("k,recall") != std::string::npos);
  const std::string csv = slurp(out);
  CHECK(csv.find("1,") != std::string::npos);
  CHECK(csv.find("5,") != std::string::npos);
  // 8-bit reconstruction: the approximate scan tracks the exact one.
  CHECK(value_after(csv, "5,") >= 0.9);

  const RunResult bad =
      run_cli("recall --index " + idx + " --queries " + kQueries);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error") != std::string::npos);
}

TEST_CASE("recall accepts explicit ivecs ground truth") {
  write_inputs();
  const std::string idx = (workspace() / "p8.tbq").string();
  REQUIRE(run_cli("quantize --mode mse --bits 8 --seed 7 --input " + kVecs +
                  " --output " + idx)
              .code == 0);
  const std::vector<int64_t> gt =
      exact_ground_truth(read_fvecs(kVecs), read_fvecs(kQueries));
  std::vector<std::vector<int32_t>> rows;
  rows.reserve(gt.size());
  for (int64_t id : gt) rows.push_back({int32_t(id)});
  const std::string gt_path = (workspace() / "gt.ivecs").string();
  write_ivecs(gt_path, rows);

  const RunResult r = run_cli("recall --index " + idx + " --queries " +
                              kQueries + " --ground-truth " + gt_path +
                              " --k-list 1,10");
  CHECK(r.code == 0);
  CHECK(r.err.find("exact scan oracle") == std::string::npos);
  CHECK(value_after(r.out, "10,") >= 0.9);
}

TEST_CASE("eval: bounded sweep exits zero, CSV on stdout") {
  const RunResult r = run_cli(
      "eval --modes mse --bits 1,2 --dim 64 --trials 100 --seeds 2 --seed 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("mode,b,d,n_trials,metric") != std::string::npos);
  CHECK(r.out.find("mse,1,64") != std::string::npos);
  CHECK(r.out.find("all rows within bounds") != std::string::npos);
}

TEST_CASE("io failures exit 3 with a parse offset where applicable") {
  write_inputs();
  const std::string broken = (workspace() / "broken.fvecs").string();
  {
    // Header claims 1000 floats; only three follow.
    std::ofstream out(broken, std::ios::binary | std::ios::trunc);
    const int32_t dim = 1000;
    const float junk[3] = {1.f, 2.f, 3.f};
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(junk), 12);
  }
  const std::string idx = (workspace() / "broken.tbq").string();
  const RunResult r =
      run_cli("quantize --input " + broken + " --output " + idx);
  CHECK(r.code == 3);
  CHECK(r.err.find("offset") != std::string::npos);

  const RunResult missing = run_cli(
      "quantize --input /nonexistent/missing.fvecs --output " + idx);
  CHECK(missing.code == 3);
}

TEST_CASE("thread count flag and environment fallback") {
  const RunResult flag = run_cli("codebook --bits 1 --threads 2");
  CHECK(flag.code == 0);
  CHECK(flag.out.find("threads=2") != std::string::npos);
  const RunResult env = run_cli("codebook --bits 1", "TBQ_THREADS=3");
  CHECK(env.code == 0);
  CHECK(env.out.find("threads=3") != std::string::npos);
}
