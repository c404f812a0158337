#include "tbq/nn_search.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tbq/packing.hpp"

namespace tbq {

namespace {

/* Centroid values at working scale, indexed directly by code (2^b entries). */
std::vector<double> centroid_table(const MseQuantizer& q) {
  std::vector<double> lut(size_t(1) << q.bits());
  for (size_t c = 0; c < lut.size(); ++c)
    lut[c] = q.centroid_value(uint32_t(c));
  return lut;
}

double packed_dot(const std::vector<uint8_t>& bytes, int b, const double* qrot,
                  int d, const std::vector<double>& lut) {
  double acc = 0.0;
  for (int i = 0; i < d; ++i)
    acc += qrot[i] * lut[packed_code_at(bytes, b, size_t(i))];
  return acc;
}

/* <sq, signs> with the 1-bit convention: bit 1 -> +1, bit 0 -> -1. */
double sign_dot(const std::vector<uint8_t>& bytes, const double* sq, int m) {
  double acc = 0.0;
  const int full = m >> 3;
  for (int byte = 0; byte < full; ++byte) {
    const uint8_t v = bytes[size_t(byte)];
    const double* p = sq + byte * 8;
    for (int k = 0; k < 8; ++k) acc += (v >> k) & 1 ? p[k] : -p[k];
  }
  for (int i = full * 8; i < m; ++i)
    acc += (bytes[size_t(i) >> 3] >> (i & 7)) & 1 ? sq[i] : -sq[i];
  return acc;
}

void score_all(const QuantizedIndex& index, const Eigen::VectorXd& query,
               Eigen::VectorXd& scores) {
  const IndexHeader& h = index.header();
  scores.resize(Eigen::Index(h.n));
  if (h.mode == QuantMode::MSE) {
    if (!index.mse_quantizer.has_value())
      throw std::logic_error("search: index quantizer not initialized");
    const MseQuantizer& q = *index.mse_quantizer;
    const Eigen::VectorXd qrot = q.rotation().apply(query);
    const std::vector<double> lut = centroid_table(q);
    const int d = q.dim();
    for (uint64_t i = 0; i < h.n; ++i) {
      const QuantizedVecMse& rec = index.data.mse_records[i];
      scores[Eigen::Index(i)] =
          double(rec.norm) * packed_dot(rec.idx.bytes, q.bits(), qrot.data(), d, lut);
    }
  } else {
    if (!index.prod_quantizer.has_value())
      throw std::logic_error("search: index quantizer not initialized");
    const ProdQuantizer& q = *index.prod_quantizer;
    const MseQuantizer& stage = q.mse_stage();
    const Eigen::VectorXd qrot = stage.rotation().apply(query);
    const Eigen::VectorXd sq = q.sketch().matrix_f64() * query;
    const double scale = q.sketch().scale();
    const std::vector<double> lut = centroid_table(stage);
    const int d = q.dim(), m = q.width();
    for (uint64_t i = 0; i < h.n; ++i) {
      const QuantizedVecProd& rec = index.data.prod_records[i];
      double s = packed_dot(rec.idx.bytes, stage.bits(), qrot.data(), d, lut);
      if (rec.gamma != 0.0f)
        s += scale * double(rec.gamma) * sign_dot(rec.signs.bytes, sq.data(), m);
      scores[Eigen::Index(i)] = double(rec.norm) * s;
    }
  }
}

}  // namespace

QuantizedIndex build_index(const Eigen::MatrixXd& vectors, QuantMode mode,
                           int b, uint64_t seed, int m) {
  if (vectors.cols() == 0)
    throw std::invalid_argument("build_index: empty input");
  if (!vectors.allFinite())
    throw std::invalid_argument("build_index: non-finite input");
  const int d = int(vectors.rows());
  QuantizedIndex index;
  IndexHeader& h = index.data.header;
  h.mode = mode;
  h.d = uint32_t(d);
  h.b = uint32_t(b);
  h.n = uint64_t(vectors.cols());
  h.master_seed = seed;
  if (mode == QuantMode::MSE) {
    index.mse_quantizer.emplace(d, b, seed);
    h.m = 0;
    h.source_tag = uint32_t(index.mse_quantizer->codebook().source.dim());
    index.data.mse_records = quant_mse_batch(*index.mse_quantizer, vectors);
  } else {
    index.prod_quantizer.emplace(d, b, seed, m);
    h.m = uint32_t(index.prod_quantizer->width());
    h.source_tag =
        uint32_t(index.prod_quantizer->mse_stage().codebook().source.dim());
    index.data.prod_records = quant_prod_batch(*index.prod_quantizer, vectors);
  }
  return index;
}

void save_index(const std::string& path, const QuantizedIndex& index) {
  write_index(path, index.data);
}

QuantizedIndex load_index(const std::string& path) {
  QuantizedIndex index;
  index.data = read_index(path);
  const IndexHeader& h = index.data.header;
  if (h.mode == QuantMode::MSE)
    index.mse_quantizer.emplace(int(h.d), int(h.b), h.master_seed);
  else
    index.prod_quantizer.emplace(int(h.d), int(h.b), h.master_seed, int(h.m));
  return index;
}

SearchResult search(const QuantizedIndex& index, const Eigen::VectorXd& query,
                    int k) {
  if (query.size() != index.dim())
    throw std::invalid_argument("search: query dimension mismatch");
  if (!query.allFinite())
    throw std::invalid_argument("search: non-finite query");
  if (k < 1) throw std::invalid_argument("search: k must be >= 1");
  SearchResult res;
  const uint64_t n = index.size();
  if (n == 0) return res;

  Eigen::VectorXd scores;
  score_all(index, query, scores);

  const size_t kk = size_t(std::min<uint64_t>(uint64_t(k), n));
  std::vector<int64_t> ids(n);
  std::iota(ids.begin(), ids.end(), int64_t(0));
  std::partial_sort(ids.begin(), ids.begin() + std::ptrdiff_t(kk), ids.end(),
                    [&](int64_t a, int64_t b2) {
                      const double sa = scores[Eigen::Index(a)];
                      const double sb = scores[Eigen::Index(b2)];
                      return sa > sb || (sa == sb && a < b2);
                    });
  ids.resize(kk);
  res.scores.reserve(kk);
  for (int64_t id : ids) res.scores.push_back(scores[Eigen::Index(id)]);
  res.ids = std::move(ids);
  return res;
}

std::vector<int64_t> exact_ground_truth(const Eigen::MatrixXd& vectors,
                                        const Eigen::MatrixXd& queries) {
  if (vectors.rows() != queries.rows())
    throw std::invalid_argument("exact_ground_truth: dimension mismatch");
  if (vectors.cols() == 0)
    throw std::invalid_argument("exact_ground_truth: empty dataset");
  const Eigen::MatrixXd g = vectors.transpose() * queries;  // n x q
  std::vector<int64_t> out(size_t(queries.cols()));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < g.rows(); ++i)
      if (g(i, j) > g(best, j)) best = i;  // ties keep the lowest id
    out[size_t(j)] = int64_t(best);
  }
  return out;
}

RecallTable recall_eval(const QuantizedIndex& index,
                        const Eigen::MatrixXd& queries,
                        const std::vector<int64_t>& ground_truth_top1,
                        const std::vector<int>& k_list) {
  if (queries.rows() != index.dim())
    throw std::invalid_argument("recall_eval: query dimension mismatch");
  if (ground_truth_top1.size() != size_t(queries.cols()))
    throw std::invalid_argument(
        "recall_eval: ground truth missing or wrong length");
  if (k_list.empty())
    throw std::invalid_argument("recall_eval: empty k list");
  const uint64_t n = index.size();
  for (int64_t id : ground_truth_top1)
    if (id < 0 || uint64_t(id) >= n)
      throw std::invalid_argument("recall_eval: ground truth id out of range");
  int k_max = 1;
  for (int k : k_list) {
    if (k < 1) throw std::invalid_argument("recall_eval: k must be >= 1");
    k_max = std::max(k_max, k);
  }

  RecallTable table;
  table.k_list = k_list;
  table.n_queries = uint64_t(queries.cols());
  std::vector<uint64_t> hits(k_list.size(), 0);
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    const SearchResult res = search(index, queries.col(j), k_max);
    const auto it = std::find(res.ids.begin(), res.ids.end(),
                              ground_truth_top1[size_t(j)]);
    if (it == res.ids.end()) continue;
    const size_t pos = size_t(it - res.ids.begin());
    for (size_t t = 0; t < k_list.size(); ++t)
      if (pos < size_t(k_list[t])) ++hits[t];
  }
  table.recall.resize(k_list.size());
  for (size_t t = 0; t < k_list.size(); ++t)
    table.recall[t] = double(hits[t]) / double(table.n_queries);
  return table;
}

std::string recall_csv(const RecallTable& table) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "k,recall\n";
  for (size_t t = 0; t < table.k_list.size(); ++t)
    os << table.k_list[t] << ',' << table.recall[t] << '\n';
  return os.str();
}

void write_recall_csv(const std::string& path, const RecallTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << recall_csv(table);
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace tbq
