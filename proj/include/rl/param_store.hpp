#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rl/mat.hpp"

namespace rl {

// Ordered collection of named tensors. Shapes are fixed after construction;
// the flat view concatenates tensors in insertion order and round-trips
// bit-exactly, which is what the conjugate-gradient and line-search algebra
// relies on.
//
// Checkpoint format (stable): magic "RLT1", then u32 tensor count, then per
// tensor: u32 name length, name bytes, u32 rows, u32 cols, rows*cols doubles.
// All integers and doubles are little-endian; doubles are IEEE-754 binary64.
class ParamStore {
 public:
  Mat& add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw std::logic_error("ParamStore: duplicate tensor " + name);
    index_[name] = mats_.size();
    names_.push_back(name);
    mats_.emplace_back(rows, cols);
    return mats_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Mat& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no tensor " + name);
    return mats_[it->second];
  }
  const Mat& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no tensor " + name);
    return mats_[it->second];
  }

  size_t tensor_count() const { return mats_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Mat& tensor(size_t i) { return mats_[i]; }
  const Mat& tensor(size_t i) const { return mats_[i]; }

  size_t total_size() const {
    size_t n = 0;
    for (const auto& m : mats_) n += m.size();
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& m : mats_) out.insert(out.end(), m.a.begin(), m.a.end());
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != total_size()) throw std::invalid_argument("ParamStore: flat size mismatch");
    size_t off = 0;
    for (auto& m : mats_) {
      std::copy(flat.begin() + off, flat.begin() + off + m.size(), m.a.begin());
      off += m.size();
    }
  }

  static ParamStore zeros_like(const ParamStore& p) {
    ParamStore out;
    for (size_t i = 0; i < p.tensor_count(); ++i)
      out.add(p.name(i), p.tensor(i).rows, p.tensor(i).cols);
    return out;
  }

  void fill(double v) {
    for (auto& m : mats_)
      for (auto& x : m.a) x = v;
  }

  void axpy(double alpha, const ParamStore& g) {
    if (g.tensor_count() != tensor_count()) throw std::invalid_argument("ParamStore: axpy mismatch");
    for (size_t i = 0; i < mats_.size(); ++i)
      for (size_t k = 0; k < mats_[i].a.size(); ++k) mats_[i].a[k] += alpha * g.tensor(i).a[k];
  }

  void save(std::ostream& os) const {
    os.write("RLT1", 4);
    write_u32(os, static_cast<uint32_t>(mats_.size()));
    for (size_t i = 0; i < mats_.size(); ++i) {
      write_u32(os, static_cast<uint32_t>(names_[i].size()));
      os.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
      write_u32(os, static_cast<uint32_t>(mats_[i].rows));
      write_u32(os, static_cast<uint32_t>(mats_[i].cols));
      for (double v : mats_[i].a) write_f64(os, v);
    }
  }

  static ParamStore load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "RLT1", 4) != 0)
      throw std::runtime_error("ParamStore: bad checkpoint magic");
    uint32_t count = read_u32(is);
    ParamStore out;
    for (uint32_t i = 0; i < count; ++i) {
      uint32_t len = read_u32(is);
      std::string name(len, '\0');
      is.read(name.data(), len);
      uint32_t rows = read_u32(is);
      uint32_t cols = read_u32(is);
      Mat& m = out.add(name, static_cast<int>(rows), static_cast<int>(cols));
      for (auto& v : m.a) v = read_f64(is);
      if (!is) throw std::runtime_error("ParamStore: truncated checkpoint");
    }
    return out;
  }

  void save_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ParamStore: cannot open " + path);
    save(f);
  }

  static ParamStore load_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ParamStore: cannot open " + path);
    return load(f);
  }

 private:
  static void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  static uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  static void write_f64(std::ostream& os, double v) {
    uint64_t u = std::bit_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
  }

  std::vector<Mat> mats_;
  std::vector<std::string> names_;
  std::map<std::string, size_t> index_;
};

}  // namespace rl
