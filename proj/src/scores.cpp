#include "specdeck/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

namespace {

double dot_f(const float* a, const float* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double norm_f(const float* a, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(a[i]) * a[i];
  return std::sqrt(s);
}

double cosine(const float* a, const float* b, int n) {
  const double na = norm_f(a, n);
  const double nb = norm_f(b, n);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot_f(a, b, n) / (na * nb);
}

}  // namespace

std::vector<double> score_attention(const VisualTokenGrid& grid,
                                    const CrossAttentionInputs& xattn) {
  grid.validate();
  xattn.validate();
  if (xattn.num_visual != grid.num_tokens()) {
    throw std::invalid_argument(
        "score_attention: N_v mismatch between grid and attention inputs");
  }
  const int nv = xattn.num_visual;
  const double scale = 1.0 / std::sqrt(static_cast<double>(xattn.key_dim));
  std::vector<double> out(static_cast<size_t>(nv), 0.0);
  std::vector<double> row(static_cast<size_t>(nv));
  for (int l = 0; l < xattn.layers; ++l) {
    for (int h = 0; h < xattn.heads; ++h) {
      for (int i = 0; i < xattn.text_len; ++i) {
        const float* q = xattn.query(l, h, i);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < nv; ++j) {
          row[j] = dot_f(q, xattn.key(l, h, j), xattn.key_dim) * scale;
          max_logit = std::max(max_logit, row[j]);
        }
        double denom = 0.0;
        for (int j = 0; j < nv; ++j) {
          row[j] = std::exp(row[j] - max_logit);
          denom += row[j];
        }
        for (int j = 0; j < nv; ++j) out[j] += row[j] / denom;
      }
    }
  }
  const double inv =
      1.0 / (static_cast<double>(xattn.layers) * xattn.heads * xattn.text_len);
  for (double& v : out) v *= inv;
  return out;
}

std::vector<double> score_temporal(const VisualTokenGrid& grid) {
  grid.validate();
  std::vector<double> out(static_cast<size_t>(grid.num_tokens()));
  size_t idx = 0;
  for (int f = 0; f < grid.frames; ++f) {
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c, ++idx) {
        const float* v = grid.token(f, r, c);
        double sum = 0.0;
        int count = 0;
        if (f - 1 >= 0) {
          sum += cosine(v, grid.token(f - 1, r, c), grid.dim);
          ++count;
        }
        if (f + 1 < grid.frames) {
          sum += cosine(v, grid.token(f + 1, r, c), grid.dim);
          ++count;
        }
        // A single frame has no temporal neighbors; nothing repeats, so the
        // redundancy score is zero.
        out[idx] = count > 0 ? 1.0 - sum / count : 0.0;
      }
    }
  }
  return out;
}

std::vector<double> score_spatial(const VisualTokenGrid& grid, int crop_side) {
  grid.validate();
  if (crop_side < 1) throw std::invalid_argument("score_spatial: crop_side must be >= 1");
  std::vector<double> out(static_cast<size_t>(grid.num_tokens()), 0.0);

  std::vector<std::vector<double>> unit;  // normalized embeddings of one crop
  for (int f = 0; f < grid.frames; ++f) {
    for (int r0 = 0; r0 < grid.rows; r0 += crop_side) {
      const int r1 = std::min(r0 + crop_side, grid.rows);
      for (int c0 = 0; c0 < grid.cols; c0 += crop_side) {
        const int c1 = std::min(c0 + crop_side, grid.cols);
        const int m = (r1 - r0) * (c1 - c0);
        unit.assign(static_cast<size_t>(m), std::vector<double>(grid.dim));
        std::vector<size_t> flat(static_cast<size_t>(m));
        int t = 0;
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c, ++t) {
            const float* v = grid.token(f, r, c);
            const double n = norm_f(v, grid.dim);
            for (int k = 0; k < grid.dim; ++k) {
              unit[t][k] = n > 0.0 ? static_cast<double>(v[k]) / n : 0.0;
            }
            flat[t] = (static_cast<size_t>(f) * grid.rows + r) * grid.cols + c;
          }
        }
        for (int j = 0; j < m; ++j) {
          double mean = 0.0;
          std::vector<double> sim(static_cast<size_t>(m));
          for (int k = 0; k < m; ++k) {
            double s = 0.0;
            for (int d = 0; d < grid.dim; ++d) s += unit[j][d] * unit[k][d];
            sim[k] = s;
            mean += s;
          }
          mean /= m;
          double var = 0.0;
          for (int k = 0; k < m; ++k) {
            var += (sim[k] - mean) * (sim[k] - mean);
          }
          out[flat[j]] = var / m;
        }
      }
    }
  }
  return out;
}

ScoreMap make_raw_scores(const VisualTokenGrid& grid,
                         const CrossAttentionInputs& xattn, int crop_side) {
  ScoreMap scores;
  scores.frames = grid.frames;
  scores.rows = grid.rows;
  scores.cols = grid.cols;
  scores.raw_attn = score_attention(grid, xattn);
  scores.raw_temp = score_temporal(grid);
  scores.raw_spa = score_spatial(grid, crop_side);
  return scores;
}

namespace {

// Per-frame z-score with population std; zero where the frame std is zero.
std::vector<double> z_normalize(const std::vector<double>& raw, int frames,
                                int per_frame) {
  std::vector<double> out(raw.size());
  for (int f = 0; f < frames; ++f) {
    const size_t base = static_cast<size_t>(f) * per_frame;
    double mean = 0.0;
    for (int i = 0; i < per_frame; ++i) mean += raw[base + i];
    mean /= per_frame;
    double var = 0.0;
    for (int i = 0; i < per_frame; ++i) {
      const double d = raw[base + i] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / per_frame);
    for (int i = 0; i < per_frame; ++i) {
      out[base + i] = sd > 0.0 ? (raw[base + i] - mean) / sd : 0.0;
    }
  }
  return out;
}

}  // namespace

KeepSet fuse_and_select(ScoreMap& scores, double keep_ratio) {
  if (!(keep_ratio > 0.0) || keep_ratio > 1.0) {
    throw std::invalid_argument("fuse_and_select: keep_ratio must be in (0, 1]");
  }
  const int nv = scores.num_tokens();
  const int per_frame = scores.rows * scores.cols;
  if (nv <= 0 || scores.raw_attn.size() != static_cast<size_t>(nv) ||
      scores.raw_temp.size() != static_cast<size_t>(nv) ||
      scores.raw_spa.size() != static_cast<size_t>(nv)) {
    throw std::invalid_argument("fuse_and_select: raw score shapes do not match dims");
  }

  scores.norm_attn = z_normalize(scores.raw_attn, scores.frames, per_frame);
  scores.norm_temp = z_normalize(scores.raw_temp, scores.frames, per_frame);
  scores.norm_spa = z_normalize(scores.raw_spa, scores.frames, per_frame);
  scores.fused.resize(static_cast<size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    scores.fused[i] = scores.norm_attn[i] + scores.norm_spa[i] + scores.norm_temp[i];
  }

  const long long want = std::llround(keep_ratio * nv);
  const int k = static_cast<int>(std::clamp<long long>(want, 1, nv));

  std::vector<int> order(static_cast<size_t>(nv));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores.fused[a] != scores.fused[b]) return scores.fused[a] > scores.fused[b];
    return a < b;
  });
  order.resize(static_cast<size_t>(k));
  std::sort(order.begin(), order.end());

  KeepSet keep;
  keep.keep_ratio = keep_ratio;
  keep.indices.reserve(order.size());
  for (int flat : order) {
    keep.indices.push_back(GridIndex{flat / per_frame,
                                     (flat % per_frame) / scores.cols,
                                     flat % scores.cols});
  }
  return keep;
}

PrunedTokens prune_grid(const VisualTokenGrid& grid, const KeepSet& keep) {
  grid.validate();
  PrunedTokens out;
  out.dim = grid.dim;
  out.indices.reserve(keep.indices.size());
  out.embeddings.reserve(keep.indices.size() * static_cast<size_t>(grid.dim));
  const GridIndex* prev = nullptr;
  for (const GridIndex& g : keep.indices) {
    if (g.frame < 0 || g.frame >= grid.frames || g.row < 0 || g.row >= grid.rows ||
        g.col < 0 || g.col >= grid.cols) {
      throw std::out_of_range("prune_grid: keep index out of range");
    }
    if (prev != nullptr && !(*prev < g)) {
      throw std::invalid_argument("prune_grid: keep indices must be strictly ascending");
    }
    prev = &g;
    out.indices.push_back(g);
    const float* v = grid.token(g.frame, g.row, g.col);
    out.embeddings.insert(out.embeddings.end(), v, v + grid.dim);
  }
  return out;
}

VisualTokenGrid score_field_as_grid(const ScoreMap& scores,
                                    const std::vector<double>& field) {
  if (field.size() != static_cast<size_t>(scores.num_tokens())) {
    throw std::invalid_argument("score_field_as_grid: field size mismatch");
  }
  VisualTokenGrid g;
  g.frames = scores.frames;
  g.rows = scores.rows;
  g.cols = scores.cols;
  g.dim = 1;
  g.data.resize(field.size());
  std::transform(field.begin(), field.end(), g.data.begin(),
                 [](double v) { return static_cast<float>(v); });
  return g;
}

std::string KeepSet::to_json(int frames, int rows, int cols) const {
  nlohmann::json j;
  j["frames"] = frames;
  j["rows"] = rows;
  j["cols"] = cols;
  j["keep_ratio"] = keep_ratio;
  auto& arr = j["indices"] = nlohmann::json::array();
  for (const GridIndex& g : indices) {
    arr.push_back({g.frame, g.row, g.col});
  }
  return j.dump();
}

KeepSet KeepSet::from_json(const std::string& text, int* frames, int* rows,
                           int* cols) {
  const auto j = nlohmann::json::parse(text);
  if (frames != nullptr) *frames = j.at("frames").get<int>();
  if (rows != nullptr) *rows = j.at("rows").get<int>();
  if (cols != nullptr) *cols = j.at("cols").get<int>();
  KeepSet keep;
  keep.keep_ratio = j.at("keep_ratio").get<double>();
  for (const auto& idx : j.at("indices")) {
    keep.indices.push_back(GridIndex{idx.at(0).get<int>(), idx.at(1).get<int>(),
                                     idx.at(2).get<int>()});
  }
  return keep;
}

}  // namespace specdeck
