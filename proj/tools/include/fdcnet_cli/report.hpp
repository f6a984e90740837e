#pragma once

#include <string>
#include <vector>

#include "fdcnet/trainer.hpp"

namespace fdcnet::cli {

struct Series {
  std::string name;
  EvalReport report;
};

enum class Metric { output_snr, cc, mse, acc4 };

const char* metric_file_stem(Metric m);

// Line chart of one metric against input SNR, one polyline per series in
// input order.
std::string metric_chart_svg(Metric m, const std::vector<Series>& series);

// Averaged rows side by side: series, MSE, CC (%), SNR (dB), accuracy.
std::string summary_table(const std::vector<Series>& series);

}  // namespace fdcnet::cli
