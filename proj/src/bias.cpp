#include "specdeck/bias.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

std::vector<bool> classify_boundary(int rows, int cols, double band,
                                    bool four_sided) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("classify_boundary: rows and cols must be >= 1");
  }
  if (!(band > 0.0) || !(band < 0.5)) {
    throw std::invalid_argument("classify_boundary: band must be in (0, 0.5)");
  }
  const auto in_band = [band](int i, int n) {
    const double center = (i + 0.5) / n;
    return center < band || center > 1.0 - band;
  };
  std::vector<bool> mask(static_cast<size_t>(rows) * cols, false);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool b = in_band(r, rows);
      if (four_sided) b = b || in_band(c, cols);
      mask[static_cast<size_t>(r) * cols + c] = b;
    }
  }
  return mask;
}

BiasReport bias_report(const KeepSet& keep, int frames, int rows, int cols,
                       double band, bool four_sided) {
  if (keep.indices.empty()) {
    throw std::invalid_argument("bias_report: keep set must be non-empty");
  }
  if (frames < 1) throw std::invalid_argument("bias_report: frames must be >= 1");
  const std::vector<bool> mask = classify_boundary(rows, cols, band, four_sided);

  BiasReport report;
  report.band = band;
  report.per_frame_selected.assign(static_cast<size_t>(frames), 0);
  report.per_frame_boundary.assign(static_cast<size_t>(frames), 0);
  report.per_frame_share.assign(static_cast<size_t>(frames), std::nullopt);

  int boundary_cells = 0;
  for (bool b : mask) boundary_cells += b ? 1 : 0;
  report.boundary_fraction_of_grid =
      static_cast<double>(boundary_cells) / (static_cast<double>(rows) * cols);

  for (const GridIndex& g : keep.indices) {
    if (g.frame < 0 || g.frame >= frames || g.row < 0 || g.row >= rows ||
        g.col < 0 || g.col >= cols) {
      throw std::out_of_range("bias_report: keep index out of range");
    }
    report.per_frame_selected[g.frame] += 1;
    if (mask[static_cast<size_t>(g.row) * cols + g.col]) {
      report.per_frame_boundary[g.frame] += 1;
    }
  }

  int total_selected = 0;
  int total_boundary = 0;
  double share_sum = 0.0;
  int frames_with_selection = 0;
  for (int f = 0; f < frames; ++f) {
    const int sel = report.per_frame_selected[f];
    if (sel == 0) continue;
    const double share = static_cast<double>(report.per_frame_boundary[f]) / sel;
    report.per_frame_share[f] = share;
    total_selected += sel;
    total_boundary += report.per_frame_boundary[f];
    share_sum += share;
    ++frames_with_selection;
  }
  report.overall_share = static_cast<double>(total_boundary) / total_selected;
  report.frame_mean_share = share_sum / frames_with_selection;
  return report;
}

std::string BiasReport::to_json() const {
  nlohmann::json j;
  j["band"] = band;
  j["boundary_fraction_of_grid"] = boundary_fraction_of_grid;
  j["overall_share"] = overall_share;
  j["frame_mean_share"] = frame_mean_share;
  auto& frames_arr = j["frames"] = nlohmann::json::array();
  for (size_t f = 0; f < per_frame_selected.size(); ++f) {
    nlohmann::json row;
    row["frame_index"] = f;
    row["selected"] = per_frame_selected[f];
    row["boundary_selected"] = per_frame_boundary[f];
    if (per_frame_share[f].has_value()) {
      row["share"] = *per_frame_share[f];
    } else {
      row["share"] = nullptr;
    }
    frames_arr.push_back(std::move(row));
  }
  return j.dump();
}

std::string BiasReport::to_csv() const {
  std::ostringstream os;
  os << "frame_index,selected,boundary_selected,share\n";
  for (size_t f = 0; f < per_frame_selected.size(); ++f) {
    os << f << ',' << per_frame_selected[f] << ',' << per_frame_boundary[f] << ',';
    if (per_frame_share[f].has_value()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.10g", *per_frame_share[f]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace specdeck
