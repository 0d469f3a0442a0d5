// Copyright 2026 The atfmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace atfmag::svg {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

std::vector<double> ticks(double lo, double hi, int target = 6) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

// viridis-like ramp through five stops
std::string colour(double t) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double u = t - k;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(stops[k][0] + u * (stops[k + 1][0] - stops[k][0])),
                static_cast<int>(stops[k][1] + u * (stops[k + 1][1] - stops[k][1])),
                static_cast<int>(stops[k][2] + u * (stops[k + 1][2] - stops[k][2])));
  return buf;
}

}  // namespace

std::string render(const LineChart& chart) {
  const double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  Range xr, yr;
  for (const auto& s : chart.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.add(chart.log_x ? std::log10(s.x[i]) : s.x[i]);
      const double e = i < s.error.size() ? s.error[i] : 0.0;
      yr.add(s.y[i] - e);
      yr.add(s.y[i] + e);
    }
  xr.pad();
  yr.pad();
  const double ypad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= ypad;
  yr.hi += ypad;
  auto px = [&](double x) { return left + ((chart.log_x ? std::log10(x) : x) - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(chart.title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  std::vector<double> xt;
  if (chart.log_x) {
    for (const auto& s : chart.series) xt.insert(xt.end(), s.x.begin(), s.x.end());
    std::sort(xt.begin(), xt.end());
    xt.erase(std::unique(xt.begin(), xt.end()), xt.end());
  } else {
    xt = ticks(xr.lo, xr.hi);
  }
  for (double t : xt)
    o << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << top + ph << "\" y2=\"" << top + ph + 5
      << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt(t)
      << "</text>\n";
  for (double t : ticks(yr.lo, yr.hi))
    o << "<line x1=\"" << left - 5 << "\" x2=\"" << left + pw << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
      << "\" stroke=\"#ddd\"/><text x=\"" << left - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << fmt(t)
      << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(chart.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* c = kPalette[k % kPalette.size()];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size() && i < s.error.size(); ++i)
      o << "<line x1=\"" << px(s.x[i]) << "\" x2=\"" << px(s.x[i]) << "\" y1=\"" << py(s.y[i] - s.error[i]) << "\" y2=\""
        << py(s.y[i] + s.error[i]) << "\" stroke=\"" << c << "\"/>\n";
    if (s.x.size() <= 32)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">"
      << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render_heatmaps(const std::vector<Heatmap>& panels, const std::string& title, const std::string& unit) {
  const double cell = 220, gap = 30, left = 50, top = 50, bar = 100;
  const double W = left + static_cast<double>(panels.size()) * (cell + gap) + bar, H = top + cell + 60;
  Range r;
  for (const auto& p : panels)
    for (double v : p.values) r.add(v);
  r.pad();

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    const double x0 = left + static_cast<double>(k) * (cell + gap);
    const double cw = cell / static_cast<double>(std::max<std::size_t>(p.xs.size(), 1));
    const double ch = cell / static_cast<double>(std::max<std::size_t>(p.ys.size(), 1));
    o << "<text x=\"" << x0 + cell / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">" << escape(p.title)
      << "</text>\n";
    for (std::size_t ix = 0; ix < p.xs.size(); ++ix)
      for (std::size_t iy = 0; iy < p.ys.size(); ++iy) {
        const double v = p.values[ix * p.ys.size() + iy];
        // y grows upwards
        const double yy = top + cell - static_cast<double>(iy + 1) * ch;
        o << "<rect x=\"" << x0 + static_cast<double>(ix) * cw << "\" y=\"" << yy << "\" width=\"" << cw + 0.5
          << "\" height=\"" << ch + 0.5 << "\" fill=\"" << colour((v - r.lo) / (r.hi - r.lo)) << "\"/>\n";
      }
    if (!p.xs.empty())
      o << "<text x=\"" << x0 << "\" y=\"" << top + cell + 16 << "\">" << fmt(p.xs.front()) << "</text><text x=\""
        << x0 + cell << "\" y=\"" << top + cell + 16 << "\" text-anchor=\"end\">" << fmt(p.xs.back())
        << "</text><text x=\"" << x0 + cell / 2 << "\" y=\"" << top + cell + 32 << "\" text-anchor=\"middle\">x (m)</text>\n";
    if (k == 0 && !p.ys.empty())
      o << "<text x=\"" << x0 - 6 << "\" y=\"" << top + cell << "\" text-anchor=\"end\">" << fmt(p.ys.front())
        << "</text><text x=\"" << x0 - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << fmt(p.ys.back())
        << "</text>\n";
  }
  const double bx = W - bar + 10;
  for (int i = 0; i < 50; ++i)
    o << "<rect x=\"" << bx << "\" y=\"" << top + cell - (i + 1) * cell / 50 << "\" width=\"14\" height=\"" << cell / 50 + 0.5
      << "\" fill=\"" << colour((i + 0.5) / 50) << "\"/>\n";
  o << "<text x=\"" << bx + 18 << "\" y=\"" << top + 10 << "\">" << fmt(r.hi) << "</text><text x=\"" << bx + 18 << "\" y=\""
    << top + cell << "\">" << fmt(r.lo) << "</text><text x=\"" << bx << "\" y=\"" << top + cell + 20 << "\">"
    << escape(unit) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace atfmag::svg
