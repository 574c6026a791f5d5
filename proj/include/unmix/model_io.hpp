// "UNMX" model container shared by NMF dictionaries and DNN weights.
//
// Layout (all integers little-endian):
//   char[4]  magic "UNMX"
//   u32      format version (1)
//   u32      kind (1 = NMF dictionary, 2 = DNN)
//   u32      source_id (1 or 2 for NMF, 0 for DNN)
//   u32      context frames L
//   u32      number of layer sizes, then that many u64 sizes
//   u32      number of matrices, then per matrix:
//              u64 rows, u64 cols, rows*cols f64 values in row-major order
//   u32      CRC-32 of every preceding byte

#pragma once

#include "unmix/dnn.hpp"
#include "unmix/io.hpp"
#include "unmix/nmf.hpp"
#include "unmix/wav.hpp"

#include <Eigen/Dense>
#include <boost/crc.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

inline constexpr uint32_t kContainerVersion = 1;

enum class ModelKind : uint32_t { kNmf = 1, kDnn = 2 };

struct ModelContainer {
  ModelKind kind = ModelKind::kNmf;
  uint32_t source_id = 0;
  uint32_t context_frames = 1;
  std::vector<uint64_t> layer_sizes;
  std::vector<Eigen::MatrixXd> matrices;
};

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void f64(double d) { u64(std::bit_cast<uint64_t>(d)); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, size_t n) : p_(p), n_(n) {}
  void need(size_t k) const {
    if (n_ - pos_ < k) throw std::runtime_error("UNMX: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  size_t remaining() const { return n_ - pos_; }

 private:
  const unsigned char* p_;
  size_t n_;
  size_t pos_ = 0;
};

inline uint32_t crc32(const unsigned char* p, size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(p, n);
  return crc.checksum();
}

}  // namespace detail

inline std::vector<unsigned char> encode_container(const ModelContainer& c) {
  detail::ByteWriter w;
  w.raw("UNMX", 4);
  w.u32(kContainerVersion);
  w.u32(static_cast<uint32_t>(c.kind));
  w.u32(c.source_id);
  w.u32(c.context_frames);
  w.u32(uint32_t(c.layer_sizes.size()));
  for (uint64_t s : c.layer_sizes) w.u64(s);
  w.u32(uint32_t(c.matrices.size()));
  for (const auto& m : c.matrices) {
    w.u64(uint64_t(m.rows()));
    w.u64(uint64_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
  }
  const uint32_t crc = detail::crc32(w.bytes().data(), w.bytes().size());
  w.u32(crc);
  return std::move(w.bytes());
}

inline ModelContainer decode_container(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "UNMX", 4) != 0)
    throw std::runtime_error("UNMX: bad magic");
  const size_t body = bytes.size() - 4;
  detail::ByteReader tail(bytes.data() + body, 4);
  if (tail.u32() != detail::crc32(bytes.data(), body))
    throw std::runtime_error("UNMX: checksum mismatch");

  detail::ByteReader r(bytes.data() + 4, body - 4);
  ModelContainer c;
  if (const uint32_t v = r.u32(); v != kContainerVersion)
    throw std::runtime_error("UNMX: unsupported version " + std::to_string(v));
  const uint32_t kind = r.u32();
  if (kind != 1 && kind != 2) throw std::runtime_error("UNMX: unknown model kind");
  c.kind = static_cast<ModelKind>(kind);
  c.source_id = r.u32();
  c.context_frames = r.u32();
  const uint32_t n_sizes = r.u32();
  r.need(size_t(n_sizes) * 8);
  for (uint32_t i = 0; i < n_sizes; ++i) c.layer_sizes.push_back(r.u64());
  const uint32_t n_mats = r.u32();
  for (uint32_t k = 0; k < n_mats; ++k) {
    const uint64_t rows = r.u64(), cols = r.u64();
    if (cols != 0 && rows > r.remaining() / 8 / cols)
      throw std::runtime_error("UNMX: matrix larger than file");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
    c.matrices.push_back(std::move(m));
  }
  if (r.remaining() != 0) throw std::runtime_error("UNMX: trailing bytes");
  return c;
}

inline std::vector<unsigned char> encode_nmf(const NmfModel& model) {
  model.validate();
  ModelContainer c;
  c.kind = ModelKind::kNmf;
  c.source_id = uint32_t(model.source_id);
  c.matrices.push_back(model.dictionary);
  return encode_container(c);
}

inline NmfModel decode_nmf(const std::vector<unsigned char>& bytes) {
  const ModelContainer c = decode_container(bytes);
  if (c.kind != ModelKind::kNmf || c.matrices.size() != 1)
    throw std::runtime_error("UNMX: not an NMF dictionary");
  NmfModel m;
  m.source_id = int(c.source_id);
  m.dictionary = c.matrices[0];
  m.validate();
  return m;
}

inline std::vector<unsigned char> encode_dnn(const DnnModel& model) {
  model.validate();
  ModelContainer c;
  c.kind = ModelKind::kDnn;
  c.context_frames = uint32_t(model.context_frames);
  for (auto s : model.layer_sizes) c.layer_sizes.push_back(uint64_t(s));
  for (size_t k = 0; k < model.n_layers(); ++k) {
    c.matrices.push_back(model.weights[k]);
    c.matrices.push_back(model.biases[k]);
  }
  return encode_container(c);
}

inline DnnModel decode_dnn(const std::vector<unsigned char>& bytes) {
  const ModelContainer c = decode_container(bytes);
  if (c.kind != ModelKind::kDnn || c.matrices.size() % 2 != 0)
    throw std::runtime_error("UNMX: not a DNN model");
  DnnModel m;
  m.context_frames = int(c.context_frames);
  for (auto s : c.layer_sizes) m.layer_sizes.push_back(Eigen::Index(s));
  for (size_t k = 0; k < c.matrices.size(); k += 2) {
    m.weights.push_back(c.matrices[k]);
    if (c.matrices[k + 1].cols() != 1) throw std::runtime_error("UNMX: bias is not a vector");
    m.biases.push_back(c.matrices[k + 1].col(0));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("UNMX: ") + e.what());
  }
  return m;
}

inline void save_nmf(const std::filesystem::path& path, const NmfModel& m) {
  write_file_atomic(path, encode_nmf(m));
}
inline NmfModel load_nmf(const std::filesystem::path& path) {
  return decode_nmf(read_file(path));
}
inline void save_dnn(const std::filesystem::path& path, const DnnModel& m) {
  write_file_atomic(path, encode_dnn(m));
}
inline DnnModel load_dnn(const std::filesystem::path& path) {
  return decode_dnn(read_file(path));
}

}  // namespace unmix
