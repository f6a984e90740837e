#include "fdcnet_cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fdcnet/errors.hpp"

namespace fdcnet::cli {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

double value(Metric m, const EvalRow& r) {
  switch (m) {
    case Metric::output_snr: return r.output_snr_db;
    case Metric::cc: return r.cc_pct;
    case Metric::mse: return r.mse;
    case Metric::acc4: return r.acc4;
  }
  return 0.0;
}

const char* title(Metric m) {
  switch (m) {
    case Metric::output_snr: return "Output SNR (dB)";
    case Metric::cc: return "CC (%)";
    case Metric::mse: return "MSE";
    case Metric::acc4: return "4-class accuracy";
  }
  return "";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Widens [lo, hi] to a range with a round step.
void nice_range(double& lo, double& hi, double& step) {
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  step = (f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10) * mag;
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;
}

}  // namespace

const char* metric_file_stem(Metric m) {
  switch (m) {
    case Metric::output_snr: return "snr";
    case Metric::cc: return "cc";
    case Metric::mse: return "mse";
    case Metric::acc4: return "acc";
  }
  return "";
}

std::string metric_chart_svg(Metric m, const std::vector<Series>& series) {
  if (series.empty()) throw ContractError("report needs at least one series");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& r : s.report.rows) {
      x0 = std::min(x0, r.input_snr_db);
      x1 = std::max(x1, r.input_snr_db);
      y0 = std::min(y0, value(m, r));
      y1 = std::max(y1, value(m, r));
    }
  }
  double xs = 0, ys = 0;
  nice_range(x0, x1, xs);
  nice_range(y0, y1, ys);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title(m)
     << " vs input SNR</text>\n";
  os << "<g stroke=\"#dddddd\">\n";
  for (double y = y0; y <= y1 + ys * 1e-6; y += ys)
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
       << num(py(y)) << "\"/>\n";
  os << "</g>\n";
  os << "<g stroke=\"black\">\n<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
     << num(kLeft + pw) << "\" y2=\"" << num(kTop + ph) << "\"/>\n<line x1=\"" << num(kLeft) << "\" y1=\""
     << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(kTop + ph) << "\"/>\n</g>\n";
  os << "<g text-anchor=\"middle\">\n";
  for (double x = x0; x <= x1 + xs * 1e-6; x += xs)
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(kTop + ph + 18) << "\">" << num(x + 0.0) << "</text>\n";
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 8) << "\">Input SNR (dB)</text>\n</g>\n";
  os << "<g text-anchor=\"end\">\n";
  for (double y = y0; y <= y1 + ys * 1e-6; y += ys)
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(y) + 4) << "\">" << num(y + 0.0) << "</text>\n";
  os << "</g>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    auto rows = series[i].report.rows;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const EvalRow& a, const EvalRow& b) { return a.input_snr_db < b.input_snr_db; });
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < rows.size(); ++k)
      os << (k ? " " : "") << num(px(rows[k].input_snr_db)) << ',' << num(py(value(m, rows[k])));
    os << "\"/>\n";
    for (const auto& r : rows)
      os << "<circle cx=\"" << num(px(r.input_snr_db)) << "\" cy=\"" << num(py(value(m, r))) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 32)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(kLeft + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[i].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string summary_table(const std::vector<Series>& series) {
  std::size_t w = 6;
  for (const auto& s : series) w = std::max(w, s.name.size());
  std::ostringstream os;
  char buf[128];
  auto pad = [&](const std::string& name) { return name + std::string(w - name.size(), ' '); };
  std::snprintf(buf, sizeof buf, "  %10s  %8s  %8s  %8s\n", "MSE", "CC(%)", "SNR(dB)", "Acc");
  os << pad("series") << buf;
  for (const auto& s : series) {
    const auto& m = s.report.mean;
    std::snprintf(buf, sizeof buf, "  %10.4f  %8.2f  %8.2f  %8.4f\n", m.mse, m.cc_pct, m.output_snr_db, m.acc4);
    os << pad(s.name) << buf;
  }
  return os.str();
}

}  // namespace fdcnet::cli
