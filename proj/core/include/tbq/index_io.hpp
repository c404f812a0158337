#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbq/quantizer.hpp"

namespace tbq {

/* ---- error taxonomy: each failure mode is reported distinctly ---- */
class StorageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class IoError : public StorageError {  // open/read/write failures
  using StorageError::StorageError;
};
class BadMagicError : public StorageError {
  using StorageError::StorageError;
};
class VersionMismatchError : public StorageError {
  using StorageError::StorageError;
};
class TruncatedFileError : public StorageError {
  using StorageError::StorageError;
};
class ParseError : public StorageError {  // malformed fvecs/ivecs, offset in message
 public:
  ParseError(const std::string& what, uint64_t offset)
      : StorageError(what), byte_offset(offset) {}
  uint64_t byte_offset;
};

enum class QuantMode : uint32_t { MSE = 0, PROD = 1 };

/* "TBQ1" index file header. All fields little-endian fixed-width:
 * magic[4] | u32 version | u32 mode | u32 d | u32 b | u32 m |
 * u32 source_tag | u64 n | u64 master_seed  (44 bytes).
 * source_tag: 0 = Gaussian codebook, else the sphere dimension the
 * codebook was trained for. Rotation/sketch matrices are regenerated from
 * master_seed on load; only seeds travel in the file. */
struct IndexHeader {
  static constexpr char kMagic[4] = {'T', 'B', 'Q', '1'};
  static constexpr uint32_t kFormatVersion = 1;
  static constexpr size_t kByteSize = 44;

  uint32_t version = kFormatVersion;
  QuantMode mode = QuantMode::MSE;
  uint32_t d = 0;
  uint32_t b = 0;
  uint32_t m = 0;  // sketch width; 0 for MSE mode
  uint32_t source_tag = 0;
  uint64_t n = 0;
  uint64_t master_seed = 0;

  size_t record_byte_size() const;
  bool operator==(const IndexHeader&) const = default;
};

/* In-memory image of an index file: header plus one record vector
 * (which one is populated depends on header.mode). */
struct IndexData {
  IndexHeader header;
  std::vector<QuantizedVecMse> mse_records;
  std::vector<QuantizedVecProd> prod_records;
};

/* Byte-deterministic: equal inputs produce identical files. */
void write_index(const std::string& path, const IndexData& data);
IndexData read_index(const std::string& path);

/* fvecs: per vector, int32 dimension then d float32, little-endian.
 * Columns of the returned matrix are vectors. Malformed input raises
 * ParseError carrying the byte offset. */
Eigen::MatrixXd read_fvecs(const std::string& path);
void write_fvecs(const std::string& path, const Eigen::MatrixXd& vectors);

/* ivecs: same layout with int32 payloads. */
std::vector<std::vector<int32_t>> read_ivecs(const std::string& path);
void write_ivecs(const std::string& path,
                 const std::vector<std::vector<int32_t>>& rows);

/* Raw float32 matrix with a text sidecar "<path>.shape" holding "n d". */
Eigen::MatrixXd read_raw_matrix(const std::string& path);
void write_raw_matrix(const std::string& path, const Eigen::MatrixXd& vectors);

}  // namespace tbq
