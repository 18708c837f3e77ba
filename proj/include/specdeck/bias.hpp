#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specdeck/scores.hpp"

namespace specdeck {

// Per-frame boundary statistics of a selected token set. Frames with no
// selected tokens carry no share and are excluded from the overall means.
struct BiasReport {
  std::vector<int> per_frame_selected;
  std::vector<int> per_frame_boundary;
  std::vector<std::optional<double>> per_frame_share;
  double overall_share = 0.0;     // pooled: selected-token-weighted mean
  double frame_mean_share = 0.0;  // unweighted mean over frames with selection
  double boundary_fraction_of_grid = 0.0;
  double band = 0.1;

  std::string to_json() const;
  std::string to_csv() const;  // frame_index, selected, boundary_selected, share
};

// Row r is boundary when its token center (r + 0.5) / R lies within `band`
// of the top or bottom edge; the mask is column-independent. The four-sided
// variant also bands the left/right edges (off by default, exploration only).
std::vector<bool> classify_boundary(int rows, int cols, double band,
                                    bool four_sided = false);

BiasReport bias_report(const KeepSet& keep, int frames, int rows, int cols,
                       double band, bool four_sided = false);

}  // namespace specdeck
