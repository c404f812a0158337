#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tbq/eval.hpp"
#include "tbq/index_io.hpp"
#include "tbq/packing.hpp"
#include "tbq/quantizer.hpp"

using namespace tbq;

namespace {

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / leaf).string();
}

std::string slurp_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void spit_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

IndexData make_mse_index(int d, size_t n, int b, uint64_t seed) {
  IndexData data;
  data.header.mode = QuantMode::MSE;
  data.header.d = uint32_t(d);
  data.header.b = uint32_t(b);
  data.header.m = 0;
  data.header.n = n;
  data.header.master_seed = seed;
  const MseQuantizer q(d, b, seed);
  data.header.source_tag = uint32_t(q.codebook().source.dim());
  data.mse_records = quant_mse_batch(q, gaussian_matrix(d, n, seed + 1));
  return data;
}

IndexData make_prod_index(int d, size_t n, int b, int m, uint64_t seed) {
  IndexData data;
  data.header.mode = QuantMode::PROD;
  data.header.d = uint32_t(d);
  data.header.b = uint32_t(b);
  data.header.n = n;
  data.header.master_seed = seed;
  const ProdQuantizer q(d, b, seed, m);
  data.header.m = uint32_t(q.width());
  data.header.source_tag =
      uint32_t(q.mse_stage().codebook().source.dim());
  data.prod_records = quant_prod_batch(q, gaussian_matrix(d, n, seed + 1));
  return data;
}

}  // namespace

TEST_CASE("bit packing wire examples") {
  // b = 2: [3,0,1,2] -> 0b10'01'00'11 = 0x93, LSB-first.
  const std::vector<uint32_t> codes{3, 0, 1, 2};
  const PackedCodes packed = pack_indices(codes, 2);
  REQUIRE(packed.bytes.size() == 1);
  CHECK(packed.bytes[0] == 0x93);
  CHECK(unpack_indices(packed) == codes);

  // b = 3, count = 3: 9 bits -> 2 bytes, 7 trailing zero bits.
  const std::vector<uint32_t> three{5, 2, 7};
  const PackedCodes p3 = pack_indices(three, 3);
  REQUIRE(p3.bytes.size() == 2);
  CHECK(p3.bytes[0] == 0xD5);  // 5 | 2<<3 | (7&3)<<6
  CHECK(p3.bytes[1] == 0x01);  // top bit of 7
  CHECK(unpack_indices(p3.bytes, 3, 3) == three);

  // b = 0 packs to nothing and unpacks to zeros.
  const PackedCodes p0 = pack_indices(std::vector<uint32_t>(6, 0), 0);
  CHECK(p0.bytes.empty());
  CHECK(unpack_indices(p0) == std::vector<uint32_t>(6, 0));
  CHECK(packed_byte_size(0, 1000) == 0);
}

TEST_CASE("bit packing bijection for b in [1,8]") {
  std::mt19937_64 gen(11);
  for (int b = 1; b <= 8; ++b) {
    for (size_t count : {size_t(1), size_t(5), size_t(8), size_t(13),
                         size_t(100)}) {
      std::uniform_int_distribution<uint32_t> dist(0, (1u << b) - 1);
      std::vector<uint32_t> codes(count);
      for (auto& c : codes) c = dist(gen);
      const PackedCodes packed = pack_indices(codes, b);
      INFO("b = ", b, " count = ", count);
      CHECK(packed.bytes.size() == (b * count + 7) / 8);
      CHECK(packed.bytes.size() == packed_byte_size(b, count));
      CHECK(unpack_indices(packed) == codes);
      for (size_t j = 0; j < count; ++j)
        CHECK(packed_code_at(packed.bytes, b, j) == codes[j]);
    }
  }
}

TEST_CASE("packing rejects overflow and inconsistent byte lengths") {
  const std::vector<uint32_t> big{4};
  CHECK_THROWS_AS((void)pack_indices(big, 2), std::invalid_argument);
  const std::vector<uint32_t> ok{1, 2, 3};
  CHECK_THROWS_AS((void)pack_indices(ok, 9), std::invalid_argument);
  const PackedCodes packed = pack_indices(ok, 2);
  std::vector<uint8_t> short_bytes;  // wrong length for (b=2, count=3)
  CHECK_THROWS_AS((void)unpack_indices(short_bytes, 2, 3),
                  std::invalid_argument);
}

TEST_CASE("record byte sizes and compression ratio are exact") {
  IndexHeader h;
  h.mode = QuantMode::MSE;
  h.d = 128;
  h.b = 3;
  // ceil(3*128/8) + 4-byte norm = 48 + 4; raw float32 row is 512 bytes.
  CHECK(h.record_byte_size() == 52);
  CHECK(512.0 / double(h.record_byte_size()) ==
        doctest::Approx(512.0 / 52.0).epsilon(1e-15));

  h.mode = QuantMode::PROD;
  h.m = 64;
  // ceil(2*128/8) + ceil(64/8) + gamma + norm = 32 + 8 + 8.
  CHECK(h.record_byte_size() == 48);
}

TEST_CASE("index roundtrip preserves every field and every record") {
  for (bool prod : {false, true}) {
    const std::string path = temp_path(prod ? "tbq_t_prod.tbq"
                                            : "tbq_t_mse.tbq");
    const IndexData data = prod ? make_prod_index(24, 17, 3, 40, 77)
                                : make_mse_index(24, 17, 3, 77);
    write_index(path, data);
    const IndexData back = read_index(path);
    CHECK(back.header == data.header);
    if (prod) {
      REQUIRE(back.prod_records.size() == data.prod_records.size());
      for (size_t i = 0; i < data.prod_records.size(); ++i) {
        CHECK(back.prod_records[i].idx == data.prod_records[i].idx);
        CHECK(back.prod_records[i].signs == data.prod_records[i].signs);
        CHECK(back.prod_records[i].gamma == data.prod_records[i].gamma);
        CHECK(back.prod_records[i].norm == data.prod_records[i].norm);
      }
    } else {
      REQUIRE(back.mse_records.size() == data.mse_records.size());
      for (size_t i = 0; i < data.mse_records.size(); ++i) {
        CHECK(back.mse_records[i].idx == data.mse_records[i].idx);
        CHECK(back.mse_records[i].norm == data.mse_records[i].norm);
      }
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("index files are byte-identical across writes") {
  const IndexData data = make_prod_index(16, 9, 2, 0, 5);
  const std::string p1 = temp_path("tbq_t_det1.tbq");
  const std::string p2 = temp_path("tbq_t_det2.tbq");
  write_index(p1, data);
  write_index(p2, data);
  CHECK(slurp_bytes(p1) == slurp_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("index header layout is fixed-width little-endian") {
  const IndexData data = make_mse_index(4, 1, 2, 0x0102030405060708ull);
  const std::string path = temp_path("tbq_t_layout.tbq");
  write_index(path, data);
  const std::string bytes = slurp_bytes(path);
  REQUIRE(bytes.size() == IndexHeader::kByteSize +
                              data.header.n * data.header.record_byte_size());
  CHECK(bytes.substr(0, 4) == "TBQ1");
  auto u32_at = [&](size_t off) {
    return uint32_t(uint8_t(bytes[off])) |
           uint32_t(uint8_t(bytes[off + 1])) << 8 |
           uint32_t(uint8_t(bytes[off + 2])) << 16 |
           uint32_t(uint8_t(bytes[off + 3])) << 24;
  };
  CHECK(u32_at(4) == IndexHeader::kFormatVersion);
  CHECK(u32_at(8) == 0);   // mode = MSE
  CHECK(u32_at(12) == 4);  // d
  CHECK(u32_at(16) == 2);  // b
  CHECK(u32_at(20) == 0);  // m
  CHECK(u32_at(24) == 4);  // source_tag: sphere codebook of dim 4
  CHECK(u32_at(28) == 1);  // n (low word)
  CHECK(u32_at(32) == 0);  // n (high word)
  CHECK(u32_at(36) == 0x05060708u);  // master_seed low word, little-endian
  CHECK(u32_at(40) == 0x01020304u);
  // Payload: ceil(2*4/8) = 1 index byte + 4-byte norm.
  const std::vector<uint8_t> payload{uint8_t(bytes[44])};
  CHECK(unpack_indices(payload, 2, 4) ==
        unpack_indices(data.mse_records[0].idx));
  std::remove(path.c_str());
}

TEST_CASE("each corruption mode raises its own error type") {
  const IndexData data = make_mse_index(8, 3, 2, 9);
  const std::string path = temp_path("tbq_t_corrupt.tbq");
  write_index(path, data);
  const std::string good = slurp_bytes(path);

  std::string bad = good;
  bad[0] = 'X';
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_index(path), BadMagicError);

  bad = good;
  bad[4] = 99;  // version
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_index(path), VersionMismatchError);

  bad = good;
  bad[8] = 7;  // mode out of range
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_index(path), StorageError);

  spit_bytes(path, good.substr(0, 20));  // header cut short
  CHECK_THROWS_AS((void)read_index(path), TruncatedFileError);

  spit_bytes(path, good.substr(0, good.size() - 3));  // payload cut short
  CHECK_THROWS_AS((void)read_index(path), TruncatedFileError);

  spit_bytes(path, good + "zz");  // trailing garbage
  CHECK_THROWS_AS((void)read_index(path), TruncatedFileError);

  // Every specific type is catchable as the common base.
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_index(path), StorageError);

  std::remove(path.c_str());
  CHECK_THROWS_AS((void)read_index(path), IoError);
}

TEST_CASE("fvecs roundtrip and parse failures carry byte offsets") {
  const std::string path = temp_path("tbq_t_vecs.fvecs");
  Eigen::MatrixXd m(3, 4);
  m << 1.5, -2.0, 0.0, 8.25,
       0.5, 3.75, -1.0, 2.0,
       9.0, -0.25, 4.5, 1.0;  // exactly representable in float32
  write_fvecs(path, m);
  const Eigen::MatrixXd back = read_fvecs(path);
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);

  const std::string good = slurp_bytes(path);
  // Each row on disk: u32 dim + dim float32 = 16 bytes.
  REQUIRE(good.size() == 4 * 16);

  spit_bytes(path, good.substr(0, good.size() - 2));  // truncated payload
  CHECK_THROWS_AS((void)read_fvecs(path), ParseError);
  try {
    (void)read_fvecs(path);
  } catch (const ParseError& e) {
    CHECK(e.byte_offset > 0);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  spit_bytes(path, good + std::string(2, '\0'));  // dangling header
  CHECK_THROWS_AS((void)read_fvecs(path), ParseError);

  std::string bad = good;
  bad[16] = 2;  // second row claims dim 2: inconsistent
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_fvecs(path), ParseError);

  bad = good;
  bad[0] = 0;
  bad[1] = 0;
  bad[2] = 0;
  bad[3] = 0;  // nonpositive dim
  spit_bytes(path, bad);
  CHECK_THROWS_AS((void)read_fvecs(path), ParseError);

  std::remove(path.c_str());
  CHECK_THROWS_AS((void)read_fvecs(path), IoError);
}

TEST_CASE("ivecs roundtrip") {
  const std::string path = temp_path("tbq_t_gt.ivecs");
  const std::vector<std::vector<int32_t>> rows{{1, 2, 3}, {7, -1, 0},
                                               {5, 5, 5}};
  write_ivecs(path, rows);
  CHECK(read_ivecs(path) == rows);

  const std::string good = slurp_bytes(path);
  spit_bytes(path, good.substr(0, good.size() - 1));
  CHECK_THROWS_AS((void)read_ivecs(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("raw matrix with shape sidecar") {
  const std::string path = temp_path("tbq_t_raw.bin");
  const Eigen::MatrixXd m = gaussian_matrix(5, 7, 3);
  write_raw_matrix(path, m);

  std::ifstream shape(path + ".shape");
  REQUIRE(shape.good());
  size_t n = 0, d = 0;
  shape >> n >> d;
  CHECK(n == 7);
  CHECK(d == 5);

  const Eigen::MatrixXd back = read_raw_matrix(path);
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 7);
  CHECK((back - m.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);

  std::remove((path + ".shape").c_str());
  CHECK_THROWS_AS((void)read_raw_matrix(path), StorageError);
  std::remove(path.c_str());
}
