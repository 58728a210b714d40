// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "srpo/common.hpp"

namespace srpo::plot {

using nlohmann::json;

std::vector<double> running_mean(std::span<const double> y, int window) {
  require(window >= 1, "running_mean: window must be >= 1");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = lo; k <= i; ++k) sum += y[k];
    out[i] = sum / static_cast<double>(i + 1 - lo);
  }
  return out;
}

namespace {

void collect_fields(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      collect_fields(*it, key, out);
    } else if (it->is_number()) {
      out.push_back(key);
    }
  }
}

const json* lookup(const json& j, const std::string& dotted) {
  const json* cur = &j;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string part = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
    if (dot == std::string::npos) return cur;
    pos = dot + 1;
  }
}

std::vector<json> read_records(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("metrics", "cannot open metrics file " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      break;  // a torn final line
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

std::vector<std::string> metric_fields(const std::string& metrics_path) {
  const auto records = read_records(metrics_path);
  std::vector<std::string> out;
  if (!records.empty()) collect_fields(records.front(), "", out);
  return out;
}

Series load_series(const std::string& metrics_path, const std::string& field) {
  const auto records = read_records(metrics_path);
  Series s;
  // Run directories hold a file named metrics.jsonl; label those by directory.
  const std::filesystem::path p(metrics_path);
  s.label = p.stem().string();
  if (p.filename() == "metrics.jsonl" && !p.parent_path().filename().empty()) {
    s.label = p.parent_path().filename().string();
  }
  for (const auto& r : records) {
    const json* v = lookup(r, field);
    if (v == nullptr || !v->is_number()) {
      std::vector<std::string> fields;
      collect_fields(r, "", fields);
      throw ConfigError("field", "unknown field '" + field + "'; available: " + join(fields));
    }
    const json* step = lookup(r, "step");
    s.x.push_back(step ? step->get<double>() : static_cast<double>(s.x.size() + 1));
    s.y.push_back(v->get<double>());
  }
  return s;
}

std::string render_svg(std::span<const Series> series, int window, const std::string& y_label) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 160, kTop = 20, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double mx = 0.05 * (x1 - x0), my = 0.05 * (y1 - y0);
  x0 -= mx, x1 += mx, y0 -= my, y1 += my;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  char buf[256];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                kLeft, kTop, pw, ph);
  o << buf;
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.4g</text>\n",
                  px(xv), kTop + ph + 18, xv);
    o << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n",
                  kLeft - 6, py(yv) + 4, yv);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">step</text>\n",
                kLeft + pw / 2, kH - 10);
  o << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 16 %.1f)\">%s</text>\n",
                kTop + ph / 2, kTop + ph / 2, y_label.c_str());
  o << buf;

  auto polyline = [&](const std::vector<double>& x, const std::vector<double>& y,
                      const char* color, double width, double opacity) {
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << "\" stroke-opacity=\"" << opacity << "\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(x[i]), py(y[i]));
      o << buf;
    }
    o << "\"/>\n";
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    polyline(s.x, s.y, color, 1.0, 0.25);
    polyline(s.x, running_mean(s.y, window), color, 2.0, 1.0);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
                  "stroke-width=\"2\"/>\n<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                  kLeft + pw + 12, kTop + 14 + 18.0 * k, kLeft + pw + 36, kTop + 14 + 18.0 * k,
                  color, kLeft + pw + 42, kTop + 18 + 18.0 * k, s.label.c_str());
    o << buf;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace srpo::plot
