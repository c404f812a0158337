/* tbq: command-line frontend for the data-oblivious vector quantization
 * library.  Subcommands: codebook, quantize, dequantize, eval, search,
 * recall.
 *
 * Exit codes: 0 success, 1 validation/acceptance failure, 2 usage error,
 * 3 IO/parse error. */

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tbq/codebook.hpp"
#include "tbq/eval.hpp"
#include "tbq/index_io.hpp"
#include "tbq/nn_search.hpp"
#include "tbq/quantizer.hpp"

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;   // validation / acceptance failure
constexpr int kExitUsage = 2;     // bad flags
constexpr int kExitIo = 3;        // file IO / parse errors

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

int g_threads = 0;  // 0: library default / all available

int effective_threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

void apply_threads() { Eigen::setNbThreads(effective_threads()); }

/* Every run prints its resolved configuration before doing work. */
void print_config(const std::string& subcommand,
                  const std::vector<std::pair<std::string, std::string>>&
                      fields) {
  std::cout << "config: subcommand=" << subcommand;
  for (const auto& [k, v] : fields) std::cout << ' ' << k << '=' << v;
  std::cout << " threads=" << effective_threads() << '\n';
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Eigen::MatrixXd read_matrix(const std::string& path,
                            const std::string& format) {
  if (format == "raw") return tbq::read_raw_matrix(path);
  return tbq::read_fvecs(path);
}

void write_matrix(const std::string& path, const std::string& format,
                  const Eigen::MatrixXd& m) {
  if (format == "raw")
    tbq::write_raw_matrix(path, m);
  else
    tbq::write_fvecs(path, m);
}

/* ---------------------------------------------------------------- */

struct CodebookArgs {
  int bits = 1;
  int dim = 0;  // 0: standard gaussian source
  std::string out;
};

int run_codebook(const CodebookArgs& a) {
  print_config("codebook",
               {{"bits", std::to_string(a.bits)},
                {"dim", a.dim == 0 ? "gaussian" : std::to_string(a.dim)},
                {"out", a.out.empty() ? "-" : a.out}});
  const tbq::SourcePdf source = a.dim == 0
                                    ? tbq::SourcePdf::std_gaussian()
                                    : tbq::SourcePdf::beta_sphere(a.dim);
  Timer timer;
  const tbq::Codebook cb = tbq::build_codebook(source, a.bits);
  std::cout << "centroids:";
  for (double c : cb.centroids) std::cout << ' ' << fmt(c, 10);
  std::cout << '\n';
  std::cout << "cost: " << fmt(cb.cost, 10) << '\n';
  std::cout << "panter_dite_bound: " << fmt(tbq::panter_dite_bound(a.bits), 10)
            << '\n';
  std::cout << "iterations: " << cb.iterations
            << " converged: " << (cb.converged ? "yes" : "no")
            << " elapsed_ms: " << fmt(timer.ms(), 4) << '\n';
  if (!a.out.empty()) {
    tbq::save_codebook_cache(cb, a.out);
    std::cout << "wrote: " << a.out << '\n';
  }
  return kExitSuccess;
}

/* ---------------------------------------------------------------- */

struct QuantizeArgs {
  std::string input;
  std::string output;
  std::string format = "fvecs";
  tbq::QuantMode mode = tbq::QuantMode::MSE;
  int bits = 4;
  int sketch = 0;
  uint64_t seed = 42;
};

int run_quantize(const QuantizeArgs& a) {
  print_config("quantize",
               {{"input", a.input},
                {"output", a.output},
                {"format", a.format},
                {"mode", a.mode == tbq::QuantMode::MSE ? "mse" : "prod"},
                {"bits", std::to_string(a.bits)},
                {"sketch", std::to_string(a.sketch)},
                {"seed", std::to_string(a.seed)}});
  const Eigen::MatrixXd vecs = read_matrix(a.input, a.format);
  std::cout << "read: " << vecs.cols() << " vectors of dim " << vecs.rows()
            << '\n';
  Timer timer;
  const tbq::QuantizedIndex index =
      tbq::build_index(vecs, a.mode, a.bits, a.seed, a.sketch);
  const double build_ms = timer.ms();
  tbq::save_index(a.output, index);

  const double raw_bytes = double(vecs.size()) * 4.0;
  const double record_bytes = double(index.header().record_byte_size());
  const double payload_bytes = record_bytes * double(index.size());
  std::cout << "build_ms: " << fmt(build_ms, 4) << '\n';
  std::cout << "record_bytes: " << record_bytes
            << " payload_bytes: " << uint64_t(payload_bytes)
            << " raw_bytes: " << uint64_t(raw_bytes) << '\n';
  std::cout << "compression_ratio: " << fmt(raw_bytes / payload_bytes, 6)
            << '\n';
  std::cout << "wrote: " << a.output << '\n';
  return kExitSuccess;
}

/* ---------------------------------------------------------------- */

struct DequantizeArgs {
  std::string index;
  std::string output;
  std::string format = "fvecs";
  std::string reference;
};

int run_dequantize(const DequantizeArgs& a) {
  print_config("dequantize",
               {{"index", a.index},
                {"output", a.output},
                {"format", a.format},
                {"reference", a.reference.empty() ? "-" : a.reference}});
  const tbq::QuantizedIndex index = tbq::load_index(a.index);
  Eigen::MatrixXd rec;
  if (index.header().mode == tbq::QuantMode::MSE)
    rec = tbq::dequant_mse_batch(
        *index.mse_quantizer,
        std::span<const tbq::QuantizedVecMse>(index.data.mse_records));
  else
    rec = tbq::dequant_prod_batch(
        *index.prod_quantizer,
        std::span<const tbq::QuantizedVecProd>(index.data.prod_records));
  write_matrix(a.output, a.format, rec);
  std::cout << "reconstructed: " << rec.cols() << " vectors of dim "
            << rec.rows() << '\n';
  std::cout << "mean_norm: " << fmt(rec.colwise().norm().mean()) << '\n';

  if (!a.reference.empty()) {
    const Eigen::MatrixXd ref = read_matrix(a.reference, a.format);
    if (ref.rows() != rec.rows() || ref.cols() != rec.cols())
      throw std::invalid_argument(
          "reference shape does not match the reconstruction");
    const Eigen::ArrayXd err = (ref - rec).colwise().squaredNorm().array();
    const Eigen::ArrayXd den = ref.colwise().squaredNorm().array().max(1e-300);
    const Eigen::ArrayXd rel = err / den;
    std::cout << "roundtrip_mse_mean: " << fmt(err.mean(), 8)
              << " relative_mse_mean: " << fmt(rel.mean(), 8)
              << " relative_mse_max: " << fmt(rel.maxCoeff(), 8) << '\n';
  }
  std::cout << "wrote: " << a.output << '\n';
  return kExitSuccess;
}

/* ---------------------------------------------------------------- */

struct EvalArgs {
  std::vector<tbq::QuantMode> modes{tbq::QuantMode::MSE,
                                    tbq::QuantMode::PROD};
  std::vector<int> bits{1, 2, 3, 4, 5, 6};
  int dim = 1024;
  int sketch = 0;
  uint64_t trials = 2000;
  int seeds = 50;
  uint64_t seed = 42;
  std::string csv, json, histogram;
  int bins = 50;
};

int run_eval(const EvalArgs& a) {
  std::string modes_str, bits_str;
  for (auto m : a.modes)
    modes_str += (modes_str.empty() ? "" : ",") +
                 std::string(m == tbq::QuantMode::MSE ? "mse" : "prod");
  for (int b : a.bits)
    bits_str += (bits_str.empty() ? "" : ",") + std::to_string(b);
  print_config("eval", {{"modes", modes_str},
                        {"bits", bits_str},
                        {"dim", std::to_string(a.dim)},
                        {"sketch", std::to_string(a.sketch)},
                        {"trials", std::to_string(a.trials)},
                        {"seeds", std::to_string(a.seeds)},
                        {"seed", std::to_string(a.seed)}});
  tbq::EvalConfig cfg;
  cfg.modes = a.modes;
  cfg.bits = a.bits;
  cfg.d = a.dim;
  cfg.m = a.sketch;
  cfg.trials = a.trials;
  cfg.seeds = a.seeds;
  cfg.master_seed = a.seed;
  cfg.csv_path = a.csv;
  cfg.json_path = a.json;
  cfg.histogram_path = a.histogram;
  cfg.histogram_bins = a.bins;

  Timer timer;
  const tbq::DistortionReport report = tbq::distortion_report(cfg);
  std::cout << report.to_csv();
  std::cout << "elapsed_ms: " << fmt(timer.ms(), 4) << '\n';
  if (!report.all_pass) {
    std::cerr << "eval: at least one distortion row failed its bound check\n";
    return kExitFailure;
  }
  std::cout << "all rows within bounds\n";
  return kExitSuccess;
}

/* ---------------------------------------------------------------- */

struct SearchArgs {
  std::string index;
  std::string queries;
  int k = 10;
  std::string output;
};

int run_search(const SearchArgs& a) {
  print_config("search", {{"index", a.index},
                          {"queries", a.queries},
                          {"k", std::to_string(a.k)},
                          {"output", a.output.empty() ? "-" : a.output}});
  const tbq::QuantizedIndex index = tbq::load_index(a.index);
  const Eigen::MatrixXd queries = tbq::read_fvecs(a.queries);
  Timer timer;
  std::ostringstream csv;
  csv << "query,rank,id,score\n";
  for (int j = 0; j < queries.cols(); ++j) {
    const tbq::SearchResult res = tbq::search(index, queries.col(j), a.k);
    for (size_t r = 0; r < res.ids.size(); ++r)
      csv << j << ',' << r << ',' << res.ids[r] << ','
          << fmt(res.scores[r], 10) << '\n';
  }
  std::cout << "searched: " << queries.cols() << " queries over "
            << index.size() << " records, elapsed_ms: " << fmt(timer.ms(), 4)
            << '\n';
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(a.output, std::ios::trunc);
    if (!out) throw tbq::IoError("cannot open " + a.output);
    out << csv.str();
    std::cout << "wrote: " << a.output << '\n';
  }
  return kExitSuccess;
}

/* ---------------------------------------------------------------- */

struct RecallArgs {
  std::string index;
  std::string queries;
  std::string ground_truth;
  std::string dataset;
  std::vector<int> k_list{1, 10, 100};
  std::string output;
};

int run_recall(const RecallArgs& a) {
  std::string ks;
  for (int k : a.k_list) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  print_config("recall",
               {{"index", a.index},
                {"queries", a.queries},
                {"ground_truth", a.ground_truth.empty() ? "-" : a.ground_truth},
                {"dataset", a.dataset.empty() ? "-" : a.dataset},
                {"k_list", ks},
                {"output", a.output.empty() ? "-" : a.output}});
  const tbq::QuantizedIndex index = tbq::load_index(a.index);
  const Eigen::MatrixXd queries = tbq::read_fvecs(a.queries);

  std::vector<int64_t> gt;
  if (!a.ground_truth.empty()) {
    const auto rows = tbq::read_ivecs(a.ground_truth);
    gt.reserve(rows.size());
    for (const auto& row : rows) {
      if (row.empty())
        throw std::invalid_argument("ground truth row without entries");
      gt.push_back(row[0]);
    }
  } else if (!a.dataset.empty()) {
    std::cerr << "recall: no ground truth provided; computing the exact "
                 "scan oracle over "
              << a.dataset << '\n';
    gt = tbq::exact_ground_truth(tbq::read_fvecs(a.dataset), queries);
  } else {
    throw std::invalid_argument(
        "recall needs --ground-truth or --dataset to derive ground truth");
  }

  const tbq::RecallTable table =
      tbq::recall_eval(index, queries, gt, a.k_list);
  std::cout << tbq::recall_csv(table);
  if (!a.output.empty()) {
    tbq::write_recall_csv(a.output, table);
    std::cout << "wrote: " << a.output << '\n';
  }
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "tbq: data-oblivious vector quantization (MSE-optimal and unbiased "
      "inner-product quantizers) with quantized exhaustive search"};
  app.require_subcommand(1);
  // Let "tbq <sub> --threads N" reach the app-level option below.
  app.fallthrough();
  app.add_option("--threads", g_threads,
                 "worker threads (0 = all available)")
      ->envname("TBQ_THREADS")
      ->check(CLI::NonNegativeNumber);

  const std::vector<std::pair<std::string, tbq::QuantMode>> mode_map{
      {"mse", tbq::QuantMode::MSE}, {"prod", tbq::QuantMode::PROD}};

  CodebookArgs cb;
  CLI::App* cmd_codebook =
      app.add_subcommand("codebook", "solve and print a scalar codebook");
  cmd_codebook->add_option("--bits", cb.bits, "bit width (0..8)")
      ->required()
      ->check(CLI::Range(0, 8));
  cmd_codebook
      ->add_option("--dim", cb.dim,
                   "sphere dimension for the coordinate source "
                   "(omit for the gaussian limit)")
      ->check(CLI::Range(2, 1 << 20));
  cmd_codebook->add_option("--out", cb.out, "write a JSON codebook cache");

  QuantizeArgs qa;
  CLI::App* cmd_quantize =
      app.add_subcommand("quantize", "quantize vectors into a TBQ1 index");
  cmd_quantize->add_option("--input", qa.input, "input vectors")->required();
  cmd_quantize->add_option("--output", qa.output, "index file")->required();
  cmd_quantize->add_option("--format", qa.format, "input format")
      ->check(CLI::IsMember({"fvecs", "raw"}));
  cmd_quantize
      ->add_option("--mode", qa.mode, "quantizer mode")
      ->transform(CLI::CheckedTransformer(mode_map, CLI::ignore_case));
  cmd_quantize->add_option("--bits", qa.bits, "bits per coordinate (1..8)")
      ->check(CLI::Range(1, 8));
  cmd_quantize
      ->add_option("--sketch", qa.sketch,
                   "sign-sketch width for prod mode (0 = dim)")
      ->check(CLI::NonNegativeNumber);
  cmd_quantize->add_option("--seed", qa.seed, "master random seed")
      ->capture_default_str();

  DequantizeArgs da;
  CLI::App* cmd_dequantize = app.add_subcommand(
      "dequantize", "reconstruct vectors from a TBQ1 index");
  cmd_dequantize->add_option("--index", da.index, "index file")->required();
  cmd_dequantize->add_option("--output", da.output, "output vectors")
      ->required();
  cmd_dequantize->add_option("--format", da.format, "output format")
      ->check(CLI::IsMember({"fvecs", "raw"}));
  cmd_dequantize->add_option(
      "--reference", da.reference,
      "original vectors; enables roundtrip error statistics");

  EvalArgs ea;
  CLI::App* cmd_eval = app.add_subcommand(
      "eval", "distortion sweep against the analytic bounds");
  cmd_eval->add_option("--modes", ea.modes, "quantizer modes")
      ->transform(CLI::CheckedTransformer(mode_map, CLI::ignore_case))
      ->delimiter(',');
  cmd_eval->add_option("--bits", ea.bits, "bit widths to sweep")
      ->delimiter(',')
      ->check(CLI::Range(1, 8));
  cmd_eval->add_option("--dim", ea.dim, "vector dimension")
      ->check(CLI::Range(2, 1 << 20));
  cmd_eval
      ->add_option("--sketch", ea.sketch, "prod sketch width (0 = dim)")
      ->check(CLI::NonNegativeNumber);
  cmd_eval->add_option("--trials", ea.trials, "vectors per seed")
      ->check(CLI::PositiveNumber);
  cmd_eval->add_option("--seeds", ea.seeds, "independent quantizer seeds")
      ->check(CLI::PositiveNumber);
  cmd_eval->add_option("--seed", ea.seed, "master random seed")
      ->capture_default_str();
  cmd_eval->add_option("--csv", ea.csv, "write the report CSV here");
  cmd_eval->add_option("--json", ea.json, "write the report JSON here");
  cmd_eval->add_option("--histogram", ea.histogram,
                       "write binned error histograms here");
  cmd_eval->add_option("--bins", ea.bins, "histogram bin count")
      ->check(CLI::PositiveNumber);

  SearchArgs sa;
  CLI::App* cmd_search =
      app.add_subcommand("search", "top-k quantized inner-product search");
  cmd_search->add_option("--index", sa.index, "index file")->required();
  cmd_search->add_option("--queries", sa.queries, "query vectors (fvecs)")
      ->required();
  cmd_search->add_option("-k,--k", sa.k, "results per query")
      ->check(CLI::PositiveNumber);
  cmd_search->add_option("--output", sa.output, "results CSV (default stdout)");

  RecallArgs ra;
  CLI::App* cmd_recall =
      app.add_subcommand("recall", "recall 1@k against exact ground truth");
  cmd_recall->add_option("--index", ra.index, "index file")->required();
  cmd_recall->add_option("--queries", ra.queries, "query vectors (fvecs)")
      ->required();
  cmd_recall->add_option("--ground-truth", ra.ground_truth,
                         "ivecs ground truth (first entry per row)");
  cmd_recall->add_option("--dataset", ra.dataset,
                         "original vectors for on-the-fly ground truth");
  cmd_recall->add_option("--k-list", ra.k_list, "k values")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  cmd_recall->add_option("--output", ra.output, "recall CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    std::cerr << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    apply_threads();
    if (cmd_codebook->parsed()) return run_codebook(cb);
    if (cmd_quantize->parsed()) return run_quantize(qa);
    if (cmd_dequantize->parsed()) return run_dequantize(da);
    if (cmd_eval->parsed()) return run_eval(ea);
    if (cmd_search->parsed()) return run_search(sa);
    if (cmd_recall->parsed()) return run_recall(ra);
    std::cerr << "usage error: no subcommand selected\n";
    return kExitUsage;
  } catch (const tbq::StorageError& e) {
    std::cerr << "io/parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
