#pragma once

#include <string>
#include <vector>

#include "specdeck/grid.hpp"

namespace specdeck {

// Raw, normalized and fused per-token scores, all F x R x C flattened
// row-major (frame, row, col).
struct ScoreMap {
  int frames = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> raw_attn;
  std::vector<double> raw_temp;
  std::vector<double> raw_spa;
  std::vector<double> norm_attn;
  std::vector<double> norm_temp;
  std::vector<double> norm_spa;
  std::vector<double> fused;

  int num_tokens() const { return frames * rows * cols; }
  size_t flat(int f, int r, int c) const {
    return (static_cast<size_t>(f) * rows + r) * cols + c;
  }
};

// Retained token set, sorted ascending by (frame, row, col).
struct KeepSet {
  std::vector<GridIndex> indices;
  double keep_ratio = 1.0;

  std::string to_json(int frames, int rows, int cols) const;
  static KeepSet from_json(const std::string& text, int* frames = nullptr,
                           int* rows = nullptr, int* cols = nullptr);
};

// Retained embeddings in ascending flattened order, original indices kept as
// metadata; relative order is never permuted.
struct PrunedTokens {
  std::vector<GridIndex> indices;
  std::vector<float> embeddings;  // indices.size() x dim
  int dim = 0;
};

// Mean cross-attention weight from every text query row to each visual
// token, aggregated over layers and heads. Softmax runs over the visual
// keys of one query row; each row sums to one.
std::vector<double> score_attention(const VisualTokenGrid& grid,
                                    const CrossAttentionInputs& xattn);

// One minus the mean cosine similarity with the same-position token in the
// adjacent frames; in [0, 2]. Cosine against a zero-norm embedding is 0.
std::vector<double> score_temporal(const VisualTokenGrid& grid);

// Population variance of each token's similarity row within its local
// crop of L2-normalized embeddings. Frames that do not divide evenly get
// smaller edge crops; the variance always uses the actual crop size.
std::vector<double> score_spatial(const VisualTokenGrid& grid, int crop_side);

// All three raw scores for one grid.
ScoreMap make_raw_scores(const VisualTokenGrid& grid,
                         const CrossAttentionInputs& xattn, int crop_side);

// Per-frame z-normalization of each raw score (zero when the frame std is
// zero), unweighted fusion, and global top-k selection. Ties break by
// ascending (frame, row, col). |KeepSet| = round(keep_ratio * N_v), at
// least 1. Fills the normalized and fused fields of `scores`.
KeepSet fuse_and_select(ScoreMap& scores, double keep_ratio);

PrunedTokens prune_grid(const VisualTokenGrid& grid, const KeepSet& keep);

// Writes one score field as a VTG1 tensor with d = 1.
VisualTokenGrid score_field_as_grid(const ScoreMap& scores,
                                    const std::vector<double>& field);

}  // namespace specdeck
