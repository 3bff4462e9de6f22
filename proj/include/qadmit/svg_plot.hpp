#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "qadmit/experiment.hpp"

namespace qadmit {

enum class PlotMode { kRegret, kThreshold, kRescaled };

/// Accepts "regret", "threshold" and "rescaled".
PlotMode parse_plot_mode(const std::string& name);

class CsvFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an aggregate CSV (t,mean_regret,stderr_regret,mean_threshold, any
/// column order). Throws CsvFormatError naming a missing column, or when the
/// file has no header or no rows.
AggregateSeries read_aggregate_csv(std::istream& in, const std::string& label);
AggregateSeries load_aggregate_csv(const std::string& path);

struct PlotOptions {
  PlotMode mode = PlotMode::kRegret;
  bool log_x = false;
  std::string title;
};

inline constexpr int kCanvasWidth = 800;
inline constexpr int kCanvasHeight = 500;

/// Line chart with one polyline and legend entry per series. Rescaled mode
/// divides time and regret by each series' tau_mix.
std::string render_svg(const std::vector<AggregateSeries>& series, const PlotOptions& options);

}  // namespace qadmit
