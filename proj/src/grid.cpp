#include "specdeck/grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace specdeck {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const std::string& name) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(name + ": truncated header");
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32_block(std::ostream& os, const std::vector<float>& v) {
  for (float x : v) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    write_u32(os, bits);
  }
}

void read_f32_block(std::istream& is, std::vector<float>& v, size_t count,
                    const std::string& name) {
  v.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const uint32_t bits = read_u32(is, name);
    std::memcpy(&v[i], &bits, 4);
  }
}

void check_magic(std::istream& is, const char* expect, const std::string& name) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, expect, 4) != 0) {
    throw std::runtime_error(name + ": magic-number mismatch, expected " +
                             std::string(expect, 4));
  }
}

}  // namespace

void VisualTokenGrid::validate() const {
  if (frames < 1 || rows < 1 || cols < 1 || dim < 1) {
    throw std::invalid_argument("VisualTokenGrid: all dimensions must be >= 1");
  }
  if (data.size() != static_cast<size_t>(num_tokens()) * dim) {
    throw std::invalid_argument("VisualTokenGrid: data size does not match dims");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw std::invalid_argument("VisualTokenGrid: non-finite entry");
  }
}

void CrossAttentionInputs::validate() const {
  if (layers < 1 || heads < 1 || text_len < 1 || num_visual < 1 || key_dim < 1) {
    throw std::invalid_argument("CrossAttentionInputs: all dimensions must be >= 1");
  }
  const size_t nq = static_cast<size_t>(layers) * heads * text_len * key_dim;
  const size_t nk = static_cast<size_t>(layers) * heads * num_visual * key_dim;
  if (queries.size() != nq || keys.size() != nk) {
    throw std::invalid_argument("CrossAttentionInputs: block sizes do not match dims");
  }
}

void write_vtg1(std::ostream& os, const VisualTokenGrid& grid) {
  grid.validate();
  os.write("VTG1", 4);
  write_u32(os, static_cast<uint32_t>(grid.frames));
  write_u32(os, static_cast<uint32_t>(grid.rows));
  write_u32(os, static_cast<uint32_t>(grid.cols));
  write_u32(os, static_cast<uint32_t>(grid.dim));
  write_f32_block(os, grid.data);
}

VisualTokenGrid read_vtg1(std::istream& is, const std::string& name) {
  check_magic(is, "VTG1", name);
  VisualTokenGrid grid;
  grid.frames = static_cast<int>(read_u32(is, name));
  grid.rows = static_cast<int>(read_u32(is, name));
  grid.cols = static_cast<int>(read_u32(is, name));
  grid.dim = static_cast<int>(read_u32(is, name));
  if (grid.frames < 1 || grid.rows < 1 || grid.cols < 1 || grid.dim < 1) {
    throw std::runtime_error(name + ": invalid VTG1 dimensions");
  }
  read_f32_block(is, grid.data,
                 static_cast<size_t>(grid.num_tokens()) * grid.dim, name);
  return grid;
}

void write_xat1(std::ostream& os, const CrossAttentionInputs& xattn) {
  xattn.validate();
  os.write("XAT1", 4);
  write_u32(os, static_cast<uint32_t>(xattn.layers));
  write_u32(os, static_cast<uint32_t>(xattn.heads));
  write_u32(os, static_cast<uint32_t>(xattn.text_len));
  write_u32(os, static_cast<uint32_t>(xattn.num_visual));
  write_u32(os, static_cast<uint32_t>(xattn.key_dim));
  write_f32_block(os, xattn.queries);
  write_f32_block(os, xattn.keys);
}

CrossAttentionInputs read_xat1(std::istream& is, const std::string& name) {
  check_magic(is, "XAT1", name);
  CrossAttentionInputs x;
  x.layers = static_cast<int>(read_u32(is, name));
  x.heads = static_cast<int>(read_u32(is, name));
  x.text_len = static_cast<int>(read_u32(is, name));
  x.num_visual = static_cast<int>(read_u32(is, name));
  x.key_dim = static_cast<int>(read_u32(is, name));
  if (x.layers < 1 || x.heads < 1 || x.text_len < 1 || x.num_visual < 1 ||
      x.key_dim < 1) {
    throw std::runtime_error(name + ": invalid XAT1 dimensions");
  }
  read_f32_block(is, x.queries,
                 static_cast<size_t>(x.layers) * x.heads * x.text_len * x.key_dim,
                 name);
  read_f32_block(is, x.keys,
                 static_cast<size_t>(x.layers) * x.heads * x.num_visual * x.key_dim,
                 name);
  return x;
}

namespace {

template <typename T, typename WriteFn>
void write_file(const std::string& path, const T& value, WriteFn fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  fn(os, value);
  if (!os) throw std::runtime_error(path + ": write failed");
}

template <typename ReadFn>
auto read_file(const std::string& path, ReadFn fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open for reading");
  return fn(is, path);
}

}  // namespace

void write_vtg1_file(const std::string& path, const VisualTokenGrid& grid) {
  write_file(path, grid, [](std::ostream& os, const VisualTokenGrid& g) { write_vtg1(os, g); });
}

VisualTokenGrid read_vtg1_file(const std::string& path) {
  return read_file(path, [](std::istream& is, const std::string& n) { return read_vtg1(is, n); });
}

void write_xat1_file(const std::string& path, const CrossAttentionInputs& xattn) {
  write_file(path, xattn, [](std::ostream& os, const CrossAttentionInputs& x) { write_xat1(os, x); });
}

CrossAttentionInputs read_xat1_file(const std::string& path) {
  return read_file(path, [](std::istream& is, const std::string& n) { return read_xat1(is, n); });
}

}  // namespace specdeck
