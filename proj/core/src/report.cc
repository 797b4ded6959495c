// Copyright 2026 The CaPE Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cape/report.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

#include "cape/corpus.h"

namespace cape {
namespace {

struct MetricColumn {
  const char* name;
  std::optional<double> (*get)(const Aggregates&);
};

const std::array<MetricColumn, 8> kColumns{{
    {"D_arc", [](const Aggregates& a) { return a.d_arc; }},
    {"D_sum", [](const Aggregates& a) { return a.d_sum; }},
    {"E-P_src", [](const Aggregates& a) { return a.ep_src; }},
    {"E-R_ref", [](const Aggregates& a) { return a.er_ref; }},
    {"R1", [](const Aggregates& a) -> std::optional<double> { return a.r1; }},
    {"R2", [](const Aggregates& a) -> std::optional<double> { return a.r2; }},
    {"RL", [](const Aggregates& a) -> std::optional<double> { return a.rl; }},
    {"len", [](const Aggregates& a) -> std::optional<double> { return a.len; }},
}};

const std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                          "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string AlphaText(double alpha) { return Fmt("%.6g", alpha); }

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr int kPanelW = 260;
constexpr int kPanelH = 190;
constexpr int kCols = 4;
constexpr int kMarginTop = 60;
constexpr int kPad = 40;

}  // namespace

std::string SweepCsv(const SweepResult& sweep) {
  std::string out = "alpha," + AggregateCsvHeader() + "\n";
  for (const auto& row : sweep.rows) out += AlphaText(row.alpha) + "," + AggregateCsvRow(row.agg) + "\n";
  return out;
}

std::string ComparisonCsv(std::span<const SweepResult> sweeps) {
  std::string out = "mode,alpha," + AggregateCsvHeader() + "\n";
  for (const auto& sweep : sweeps)
    for (const auto& row : sweep.rows)
      out += sweep.mode + "," + AlphaText(row.alpha) + "," + AggregateCsvRow(row.agg) + "\n";
  return out;
}

std::string RenderSweepSvg(std::span<const SweepResult> sweeps, const std::string& title) {
  const int rows = static_cast<int>((kColumns.size() + kCols - 1) / kCols);
  const int width = kCols * kPanelW;
  const int height = kMarginTop + rows * kPanelH;

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  for (const auto& s : sweeps)
    for (const auto& r : s.rows) {
      xmin = std::min(xmin, r.alpha);
      xmax = std::max(xmax, r.alpha);
    }
  if (!(xmin <= xmax)) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (xmin == xmax) xmax = xmin + 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"10\" y=\"20\" font-size=\"14\">" << XmlEscape(title) << "</text>\n";
  for (size_t s = 0; s < sweeps.size(); ++s) {
    const int lx = 10 + static_cast<int>(s) * 130;
    svg << "<line x1=\"" << lx << "\" y1=\"38\" x2=\"" << lx + 18 << "\" y2=\"38\" stroke=\""
        << kPalette[s % kPalette.size()] << "\" stroke-width=\"2\"/>";
    svg << "<text x=\"" << lx + 22 << "\" y=\"42\">" << XmlEscape(sweeps[s].mode) << "</text>\n";
  }

  for (size_t m = 0; m < kColumns.size(); ++m) {
    const int ox = static_cast<int>(m % kCols) * kPanelW;
    const int oy = kMarginTop + static_cast<int>(m / kCols) * kPanelH;
    const double x0 = ox + kPad, x1 = ox + kPanelW - 12;
    const double y0 = oy + kPanelH - 30, y1 = oy + 20;

    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    for (const auto& s : sweeps)
      for (const auto& r : s.rows)
        if (auto v = kColumns[m].get(r.agg)) {
          ymin = std::min(ymin, *v);
          ymax = std::max(ymax, *v);
        }
    const bool empty = !(ymin <= ymax);
    if (empty) {
      ymin = 0.0;
      ymax = 1.0;
    }
    if (ymax - ymin < 1e-9) {
      ymin -= 0.05;
      ymax += 0.05;
    }
    auto px = [&](double a) { return x0 + (a - xmin) / (xmax - xmin) * (x1 - x0); };
    auto py = [&](double v) { return y0 - (v - ymin) / (ymax - ymin) * (y0 - y1); };

    svg << "<g>\n";
    svg << "<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy + 12 << "\" text-anchor=\"middle\">"
        << XmlEscape(kColumns[m].name) << "</text>\n";
    svg << "<rect x=\"" << Fmt("%.2f", x0) << "\" y=\"" << Fmt("%.2f", y1) << "\" width=\""
        << Fmt("%.2f", x1 - x0) << "\" height=\"" << Fmt("%.2f", y0 - y1)
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg << "<text x=\"" << Fmt("%.2f", x0 - 3) << "\" y=\"" << Fmt("%.2f", y0) << "\" text-anchor=\"end\">"
        << Fmt("%.3f", ymin) << "</text>\n";
    svg << "<text x=\"" << Fmt("%.2f", x0 - 3) << "\" y=\"" << Fmt("%.2f", y1 + 8)
        << "\" text-anchor=\"end\">" << Fmt("%.3f", ymax) << "</text>\n";
    svg << "<text x=\"" << Fmt("%.2f", x0) << "\" y=\"" << Fmt("%.2f", y0 + 14) << "\">"
        << AlphaText(xmin) << "</text>\n";
    svg << "<text x=\"" << Fmt("%.2f", x1) << "\" y=\"" << Fmt("%.2f", y0 + 14)
        << "\" text-anchor=\"end\">" << AlphaText(xmax) << "</text>\n";
    if (!empty) {
      for (size_t s = 0; s < sweeps.size(); ++s) {
        std::string points;
        for (const auto& r : sweeps[s].rows) {
          auto v = kColumns[m].get(r.agg);
          if (!v) continue;
          if (!points.empty()) points += ' ';
          points += Fmt("%.2f", px(r.alpha)) + "," + Fmt("%.2f", py(*v));
        }
        if (points.empty()) continue;
        svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % kPalette.size()]
            << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
      }
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void EmitReport(std::span<const SweepResult> sweeps, const std::filesystem::path& stem,
                const std::string& title) {
  std::filesystem::path csv = stem, svg = stem;
  csv += ".csv";
  svg += ".svg";
  WriteTextFile(csv, sweeps.size() == 1 ? SweepCsv(sweeps[0]) : ComparisonCsv(sweeps));
  WriteTextFile(svg, RenderSweepSvg(sweeps, title));
}

}  // namespace cape
