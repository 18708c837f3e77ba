#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace specdeck {

// Frame-major token coordinate.
struct GridIndex {
  int frame = 0;
  int row = 0;
  int col = 0;

  auto operator<=>(const GridIndex&) const = default;
};

// Per-frame, per-position token embeddings: F x R x C x d, row-major.
struct VisualTokenGrid {
  int frames = 0;
  int rows = 0;
  int cols = 0;
  int dim = 0;
  std::vector<float> data;

  int tokens_per_frame() const { return rows * cols; }
  int num_tokens() const { return frames * rows * cols; }

  size_t offset(int f, int r, int c) const {
    return ((static_cast<size_t>(f) * rows + r) * cols + c) * dim;
  }
  const float* token(int f, int r, int c) const { return data.data() + offset(f, r, c); }
  float* token(int f, int r, int c) { return data.data() + offset(f, r, c); }

  void validate() const;
};

// Text queries and visual keys per (layer, head): the inputs to the
// cross-attention relevance score. N_v must equal the companion grid's
// frame x row x col token count.
struct CrossAttentionInputs {
  int layers = 0;
  int heads = 0;
  int text_len = 0;
  int num_visual = 0;
  int key_dim = 0;
  std::vector<float> queries;  // layers x heads x text_len x key_dim
  std::vector<float> keys;     // layers x heads x num_visual x key_dim

  const float* query(int l, int h, int i) const {
    return queries.data() +
           ((static_cast<size_t>(l) * heads + h) * text_len + i) * key_dim;
  }
  const float* key(int l, int h, int j) const {
    return keys.data() +
           ((static_cast<size_t>(l) * heads + h) * num_visual + j) * key_dim;
  }

  void validate() const;
};

// Binary tensor formats (little-endian, f32 payloads):
//   VTG1: magic "VTG1", u32 F, R, C, d, then F*R*C*d floats row-major.
//   XAT1: magic "XAT1", u32 N_L, H, L_txt, N_v, d_k, then the query block
//         followed by the key block.
void write_vtg1(std::ostream& os, const VisualTokenGrid& grid);
VisualTokenGrid read_vtg1(std::istream& is, const std::string& name = "<stream>");
void write_vtg1_file(const std::string& path, const VisualTokenGrid& grid);
VisualTokenGrid read_vtg1_file(const std::string& path);

void write_xat1(std::ostream& os, const CrossAttentionInputs& xattn);
CrossAttentionInputs read_xat1(std::istream& is, const std::string& name = "<stream>");
void write_xat1_file(const std::string& path, const CrossAttentionInputs& xattn);
CrossAttentionInputs read_xat1_file(const std::string& path);

}  // namespace specdeck
