// Checkpoint container: a sequence of named float64 tensors.
//
// Each block is an ASCII header line `LEAFCKPT v1 <name> <rows> <cols>\n` followed by
// rows*cols little-endian float64 values in row-major order.
#pragma once

#include "leaf/core.hpp"
#include "leaf/nn.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace leaf::ckpt {

class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TensorMap = std::map<std::string, Mat>;

inline void write_tensor(std::ostream& os, const std::string& name, const Mat& m) {
  require(!name.empty() && name.find_first_of(" \t\n") == std::string::npos,
          "checkpoint tensor name must be a non-empty token: '" + name + "'");
  os << "LEAFCKPT v1 " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      os.write(bytes, 8);
    }
  }
}

inline TensorMap read_tensors(std::istream& is) {
  TensorMap out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream hs(line);
    std::string magic, version, name;
    long rows = -1, cols = -1;
    if (!(hs >> magic >> version >> name >> rows >> cols) || magic != "LEAFCKPT" || version != "v1" ||
        rows < 0 || cols < 0)
      throw CorruptCheckpoint("bad checkpoint header: '" + line.substr(0, 80) + "'");
    Mat m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        unsigned char bytes[8];
        if (!is.read(reinterpret_cast<char*>(bytes), 8))
          throw CorruptCheckpoint("truncated tensor data for '" + name + "'");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        m(r, c) = std::bit_cast<double>(bits);
      }
    }
    if (out.contains(name)) throw CorruptCheckpoint("duplicate tensor '" + name + "'");
    out.emplace(name, std::move(m));
  }
  return out;
}

inline void save(const std::string& path, const TensorMap& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  for (const auto& [name, m] : tensors) write_tensor(os, name, m);
}

inline TensorMap load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptCheckpoint("cannot open checkpoint: " + path);
  return read_tensors(is);
}

inline Mat as_column(const Vec& v) { return v; }

/// Stores `net` as `<prefix>.W<l>` and `<prefix>.b<l>` (biases as column vectors).
inline void put_mlp(TensorMap& out, const std::string& prefix, const nn::Mlp& net) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    out[prefix + ".W" + std::to_string(l)] = net.weight(l);
    out[prefix + ".b" + std::to_string(l)] = as_column(net.bias(l));
  }
}

/// Rebuilds an Mlp from `<prefix>.W*` / `<prefix>.b*` blocks; layer sizes come from the shapes.
inline nn::Mlp get_mlp(const TensorMap& in, const std::string& prefix, nn::Activation output) {
  std::vector<int> sizes;
  std::vector<const Mat*> ws, bs;
  for (std::size_t l = 0;; ++l) {
    auto w = in.find(prefix + ".W" + std::to_string(l));
    auto b = in.find(prefix + ".b" + std::to_string(l));
    if (w == in.end() || b == in.end()) break;
    if (b->second.cols() != 1 || b->second.rows() != w->second.rows())
      throw CorruptCheckpoint("bias shape mismatch in '" + prefix + "'");
    if (sizes.empty()) sizes.push_back(static_cast<int>(w->second.cols()));
    else if (sizes.back() != w->second.cols())
      throw CorruptCheckpoint("layer sizes do not compose in '" + prefix + "'");
    sizes.push_back(static_cast<int>(w->second.rows()));
    ws.push_back(&w->second);
    bs.push_back(&b->second);
  }
  if (ws.empty()) throw CorruptCheckpoint("missing network '" + prefix + "'");
  nn::Mlp net(sizes, output);
  for (std::size_t l = 0; l < ws.size(); ++l) {
    net.weight(l) = *ws[l];
    net.bias(l) = ws[l]->rows() ? Vec(bs[l]->col(0)) : Vec();
  }
  if (!net.finite()) throw CorruptCheckpoint("non-finite parameters in '" + prefix + "'");
  return net;
}

inline const Mat& get(const TensorMap& in, const std::string& name) {
  auto it = in.find(name);
  if (it == in.end()) throw CorruptCheckpoint("missing tensor '" + name + "'");
  return it->second;
}

}  // namespace leaf::ckpt
