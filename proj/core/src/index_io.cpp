#include "tbq/index_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace tbq {

namespace {

/* Little-endian scalar writes/reads, layout-independent of host order. */
void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
  put_u32(buf, std::bit_cast<uint32_t>(v));
}

class Cursor {
 public:
  Cursor(const std::string& data) : data_(data) {}

  uint64_t offset() const { return pos_; }
  uint64_t remaining() const { return data_.size() - pos_; }

  void need(uint64_t n, const char* what) {
    if (remaining() < n)
      throw TruncatedFileError(std::string("truncated file: expected ") +
                               what + " at byte " + std::to_string(pos_));
  }

  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= uint32_t(uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= uint64_t(uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::vector<uint8_t> bytes(size_t n, const char* what) {
    need(n, what);
    std::vector<uint8_t> out(data_.begin() + std::ptrdiff_t(pos_),
                             data_.begin() + std::ptrdiff_t(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  const std::string& data_;
  uint64_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path);
  return data;
}

void spit(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace

size_t IndexHeader::record_byte_size() const {
  if (mode == QuantMode::MSE) {
    return (size_t(b) * d + 7) / 8 + 4;
  }
  return (size_t(b - 1) * d + 7) / 8 + (size_t(m) + 7) / 8 + 8;
}

void write_index(const std::string& path, const IndexData& data) {
  const IndexHeader& h = data.header;
  const size_t n_records = h.mode == QuantMode::MSE ? data.mse_records.size()
                                                    : data.prod_records.size();
  if (n_records != h.n)
    throw StorageError("write_index: header.n does not match record count");
  std::string buf;
  buf.reserve(IndexHeader::kByteSize + h.n * h.record_byte_size());
  buf.append(IndexHeader::kMagic, 4);
  put_u32(buf, h.version);
  put_u32(buf, uint32_t(h.mode));
  put_u32(buf, h.d);
  put_u32(buf, h.b);
  put_u32(buf, h.m);
  put_u32(buf, h.source_tag);
  put_u64(buf, h.n);
  put_u64(buf, h.master_seed);
  if (h.mode == QuantMode::MSE) {
    const size_t idx_bytes = (size_t(h.b) * h.d + 7) / 8;
    for (const QuantizedVecMse& rec : data.mse_records) {
      if (rec.idx.bytes.size() != idx_bytes || rec.idx.count != h.d)
        throw StorageError("write_index: record inconsistent with header");
      buf.append(reinterpret_cast<const char*>(rec.idx.bytes.data()),
                 rec.idx.bytes.size());
      put_f32(buf, rec.norm);
    }
  } else {
    const size_t idx_bytes = (size_t(h.b - 1) * h.d + 7) / 8;
    const size_t sign_bytes = (size_t(h.m) + 7) / 8;
    for (const QuantizedVecProd& rec : data.prod_records) {
      if (rec.idx.bytes.size() != idx_bytes || rec.idx.count != h.d ||
          rec.signs.bytes.size() != sign_bytes || rec.signs.count != h.m)
        throw StorageError("write_index: record inconsistent with header");
      buf.append(reinterpret_cast<const char*>(rec.idx.bytes.data()),
                 rec.idx.bytes.size());
      buf.append(reinterpret_cast<const char*>(rec.signs.bytes.data()),
                 rec.signs.bytes.size());
      put_f32(buf, rec.gamma);
      put_f32(buf, rec.norm);
    }
  }
  spit(path, buf);
}

IndexData read_index(const std::string& path) {
  const std::string data = slurp(path);
  Cursor cur(data);
  cur.need(4, "magic");
  if (std::memcmp(data.data(), IndexHeader::kMagic, 4) != 0)
    throw BadMagicError("not a TBQ1 index file (bad magic)");
  IndexData out;
  IndexHeader& h = out.header;
  cur.bytes(4, "magic");
  h.version = cur.u32("version");
  if (h.version != IndexHeader::kFormatVersion)
    throw VersionMismatchError("unsupported index format version " +
                               std::to_string(h.version));
  const uint32_t mode_raw = cur.u32("mode");
  if (mode_raw > 1) throw StorageError("invalid mode field");
  h.mode = QuantMode(mode_raw);
  h.d = cur.u32("d");
  h.b = cur.u32("b");
  h.m = cur.u32("m");
  h.source_tag = cur.u32("source_tag");
  h.n = cur.u64("n");
  h.master_seed = cur.u64("master_seed");
  if (h.d == 0 || h.b > 8 || (h.mode == QuantMode::PROD && h.b == 0))
    throw StorageError("invalid header parameters");
  const size_t rec_size = h.record_byte_size();
  if (cur.remaining() != h.n * rec_size)
    throw TruncatedFileError(
        "payload length mismatch: have " + std::to_string(cur.remaining()) +
        " bytes, header implies " + std::to_string(h.n * rec_size));
  if (h.mode == QuantMode::MSE) {
    const size_t idx_bytes = (size_t(h.b) * h.d + 7) / 8;
    out.mse_records.resize(h.n);
    for (uint64_t i = 0; i < h.n; ++i) {
      QuantizedVecMse& rec = out.mse_records[i];
      rec.idx.bytes = cur.bytes(idx_bytes, "record indices");
      rec.idx.b = int(h.b);
      rec.idx.count = h.d;
      rec.norm = cur.f32("record norm");
    }
  } else {
    const size_t idx_bytes = (size_t(h.b - 1) * h.d + 7) / 8;
    const size_t sign_bytes = (size_t(h.m) + 7) / 8;
    out.prod_records.resize(h.n);
    for (uint64_t i = 0; i < h.n; ++i) {
      QuantizedVecProd& rec = out.prod_records[i];
      rec.idx.bytes = cur.bytes(idx_bytes, "record indices");
      rec.idx.b = int(h.b) - 1;
      rec.idx.count = h.d;
      rec.signs.bytes = cur.bytes(sign_bytes, "record signs");
      rec.signs.b = 1;
      rec.signs.count = h.m;
      rec.gamma = cur.f32("record gamma");
      rec.norm = cur.f32("record norm");
    }
  }
  return out;
}

/* ---------------- fvecs / ivecs ---------------- */

namespace {

template <typename T, typename Convert>
void read_xvecs(const std::string& path, Convert&& convert) {
  const std::string data = slurp(path);
  uint64_t pos = 0;
  int64_t expected_d = -1;
  size_t count = 0;
  while (pos < data.size()) {
    if (data.size() - pos < 4)
      throw ParseError("malformed file " + path +
                           ": dangling header at byte offset " +
                           std::to_string(pos),
                       pos);
    int32_t d = 0;
    std::memcpy(&d, data.data() + pos, 4);
    if (d <= 0)
      throw ParseError("malformed file " + path +
                           ": nonpositive dimension at byte offset " +
                           std::to_string(pos),
                       pos);
    if (expected_d >= 0 && d != expected_d)
      throw ParseError("malformed file " + path +
                           ": inconsistent dimension at byte offset " +
                           std::to_string(pos),
                       pos);
    expected_d = d;
    pos += 4;
    if (data.size() - pos < size_t(d) * 4)
      throw ParseError("malformed file " + path +
                           ": truncated vector payload at byte offset " +
                           std::to_string(pos),
                       pos);
    convert(count, d, data.data() + pos);
    pos += size_t(d) * 4;
    ++count;
  }
}

}  // namespace

Eigen::MatrixXd read_fvecs(const std::string& path) {
  std::vector<float> values;
  int64_t dim = 0;
  read_xvecs<float>(path, [&](size_t, int32_t d, const char* p) {
    dim = d;
    const size_t base = values.size();
    values.resize(base + size_t(d));
    std::memcpy(values.data() + base, p, size_t(d) * 4);
  });
  const Eigen::Index n = dim > 0 ? Eigen::Index(values.size() / size_t(dim)) : 0;
  Eigen::MatrixXd out(dim, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < dim; ++r)
      out(r, c) = double(values[size_t(c) * size_t(dim) + size_t(r)]);
  return out;
}

void write_fvecs(const std::string& path, const Eigen::MatrixXd& vectors) {
  std::string buf;
  const int32_t d = int32_t(vectors.rows());
  buf.reserve(size_t(vectors.cols()) * (4 + size_t(d) * 4));
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    put_u32(buf, std::bit_cast<uint32_t>(d));
    for (Eigen::Index r = 0; r < d; ++r)
      put_f32(buf, float(vectors(r, c)));
  }
  spit(path, buf);
}

std::vector<std::vector<int32_t>> read_ivecs(const std::string& path) {
  std::vector<std::vector<int32_t>> rows;
  read_xvecs<int32_t>(path, [&](size_t, int32_t d, const char* p) {
    std::vector<int32_t> row(static_cast<size_t>(d));
    std::memcpy(row.data(), p, size_t(d) * 4);
    rows.push_back(std::move(row));
  });
  return rows;
}

void write_ivecs(const std::string& path,
                 const std::vector<std::vector<int32_t>>& rows) {
  std::string buf;
  for (const auto& row : rows) {
    put_u32(buf, std::bit_cast<uint32_t>(int32_t(row.size())));
    for (int32_t v : row) put_u32(buf, std::bit_cast<uint32_t>(v));
  }
  spit(path, buf);
}

/* ---------------- raw float32 + sidecar shape ---------------- */

Eigen::MatrixXd read_raw_matrix(const std::string& path) {
  const std::string shape_path = path + ".shape";
  std::ifstream shape_in(shape_path);
  if (!shape_in) throw IoError("cannot open sidecar " + shape_path);
  uint64_t n = 0, d = 0;
  if (!(shape_in >> n >> d) || d == 0)
    throw ParseError("malformed sidecar " + shape_path + " (want \"n d\")", 0);
  const std::string data = slurp(path);
  if (data.size() != n * d * 4)
    throw ParseError("raw matrix " + path + ": size " +
                         std::to_string(data.size()) +
                         " bytes does not match sidecar shape",
                     data.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (uint64_t c = 0; c < n; ++c)
    for (uint64_t r = 0; r < d; ++r) {
      float v;
      std::memcpy(&v, data.data() + (c * d + r) * 4, 4);
      out(Eigen::Index(r), Eigen::Index(c)) = double(v);
    }
  return out;
}

void write_raw_matrix(const std::string& path, const Eigen::MatrixXd& vectors) {
  std::string buf;
  buf.reserve(size_t(vectors.size()) * 4);
  for (Eigen::Index c = 0; c < vectors.cols(); ++c)
    for (Eigen::Index r = 0; r < vectors.rows(); ++r)
      put_f32(buf, float(vectors(r, c)));
  spit(path, buf);
  std::ofstream shape_out(path + ".shape");
  if (!shape_out) throw IoError("cannot open sidecar for writing");
  shape_out << vectors.cols() << " " << vectors.rows() << "\n";
}

}  // namespace tbq
