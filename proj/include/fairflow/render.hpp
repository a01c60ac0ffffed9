#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairflow/analysis.hpp"
#include "fairflow/errors.hpp"

namespace fairflow {

// ---------------------------------------------------------------------------
// Plot specification

struct PlotStyle {
  std::string point_color = "#4878a8";
  std::string frontier_color = "#d08770";
  std::string best_color = "#bf616a";
  std::string bar_color = "#4878a8";
  std::string axis_color = "#333333";
  double marker_radius = 3.5;
  double best_radius = 6.0;
  double font_px = 11.0;
  double char_width_px = 6.6;  // fixed metrics by design; no text measurement
};

struct AxisRange {
  std::optional<double> lo, hi;  // unset = auto ([min, max] padded 5%)
};

struct PlotSpec {
  double width = 640.0;
  double height = 480.0;
  std::string x_label = "performance";
  std::string y_label = "fairness score";
  AxisRange x_range, y_range;
  PlotStyle style;

  void validate() const {
    if (!(width > 0.0 && height > 0.0))
      raise(Errc::SchemaError, "plot dimensions must be positive");
  }
};

namespace detail {

// fixed margins; enough room for tick labels at the declared font metrics
inline constexpr double kMarginLeft = 64.0;
inline constexpr double kMarginRight = 20.0;
inline constexpr double kMarginTop = 28.0;
inline constexpr double kMarginBottom = 52.0;

inline std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// Affine data->pixel map for one axis; invertible by construction.
struct AxisMap {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;  // pixel endpoints (px0 maps lo)

  double to_px(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }

  nlohmann::json to_json() const {
    return {{"lo", lo}, {"hi", hi}, {"px0", px0}, {"px1", px1}};
  }
};

inline AxisMap make_axis(const AxisRange& range, double data_min, double data_max,
                         double px0, double px1) {
  AxisMap m;
  m.px0 = px0;
  m.px1 = px1;
  if (range.lo && range.hi) {
    m.lo = *range.lo;
    m.hi = *range.hi;
  } else {
    double lo = data_min, hi = data_max;
    double span = hi - lo;
    if (span <= 0.0) span = std::max(std::abs(lo), 0.5);
    m.lo = range.lo ? *range.lo : lo - 0.05 * span;
    m.hi = range.hi ? *range.hi : hi + 0.05 * span;
  }
  if (!(m.hi > m.lo)) raise(Errc::SchemaError, "axis range must have positive extent");
  return m;
}

/// Tick positions at 1/2/5 x 10^k steps covering [lo, hi], aiming for about
/// `target` ticks.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0 * mag;
  if (norm <= 1.0) step = mag;
  else if (norm <= 2.0) step = 2.0 * mag;
  else if (norm <= 5.0) step = 5.0 * mag;
  std::vector<double> ticks;
  const double eps = step * 1e-9;
  double t = std::ceil((lo - eps) / step) * step;
  for (; t <= hi + eps; t += step) {
    // snap to the grid to avoid accumulation drift in the labels
    const double snapped = std::round(t / step) * step;
    ticks.push_back(snapped == 0.0 ? 0.0 : snapped);
  }
  return ticks;
}

class SvgBuilder {
 public:
  SvgBuilder(double width, double height) {
    buf_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    buf_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
            fmt_px(width) + "\" height=\"" + fmt_px(height) + "\" viewBox=\"0 0 " +
            fmt_px(width) + " " + fmt_px(height) + "\">\n";
  }

  void raw(const std::string& s) { buf_ += s; }

  void line(double x1, double y1, double x2, double y2, const std::string& color,
            double width, const std::string& cls = "") {
    buf_ += "  <line";
    if (!cls.empty()) buf_ += " class=\"" + cls + "\"";
    buf_ += " x1=\"" + fmt_px(x1) + "\" y1=\"" + fmt_px(y1) + "\" x2=\"" + fmt_px(x2) +
            "\" y2=\"" + fmt_px(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
            fmt_px(width) + "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill,
              const std::string& cls = "", const std::string& title = "") {
    buf_ += "  <circle";
    if (!cls.empty()) buf_ += " class=\"" + cls + "\"";
    buf_ += " cx=\"" + fmt_px(cx) + "\" cy=\"" + fmt_px(cy) + "\" r=\"" + fmt_px(r) +
            "\" fill=\"" + fill + "\"";
    if (title.empty()) {
      buf_ += "/>\n";
    } else {
      buf_ += "><title>" + xml_escape(title) + "</title></circle>\n";
    }
  }

  void text(double x, double y, const std::string& s, double font_px,
            const std::string& color, const std::string& anchor = "start",
            const std::string& transform = "") {
    buf_ += "  <text x=\"" + fmt_px(x) + "\" y=\"" + fmt_px(y) + "\" font-family=\"monospace\"" +
            " font-size=\"" + fmt_px(font_px) + "\" fill=\"" + color + "\" text-anchor=\"" +
            anchor + "\"";
    if (!transform.empty()) buf_ += " transform=\"" + transform + "\"";
    buf_ += ">" + xml_escape(s) + "</text>\n";
  }

  std::string finish() {
    buf_ += "</svg>\n";
    return std::move(buf_);
  }

 private:
  std::string buf_;
};

inline void draw_axes(SvgBuilder& svg, const AxisMap& x, const AxisMap& y,
                      const PlotSpec& spec) {
  const PlotStyle& st = spec.style;
  svg.line(x.px0, y.px0, x.px1, y.px0, st.axis_color, 1.0, "axis");
  svg.line(x.px0, y.px0, x.px0, y.px1, st.axis_color, 1.0, "axis");
  for (double t : nice_ticks(x.lo, x.hi)) {
    const double px = x.to_px(t);
    svg.line(px, y.px0, px, y.px0 + 4.0, st.axis_color, 1.0, "tick");
    svg.text(px, y.px0 + 16.0, fmt_tick(t), st.font_px, st.axis_color, "middle");
  }
  for (double t : nice_ticks(y.lo, y.hi)) {
    const double py = y.to_px(t);
    svg.line(x.px0 - 4.0, py, x.px0, py, st.axis_color, 1.0, "tick");
    svg.text(x.px0 - 7.0, py + st.font_px * 0.35, fmt_tick(t), st.font_px, st.axis_color,
             "end");
  }
  svg.text((x.px0 + x.px1) / 2.0, spec.height - 14.0, spec.x_label, st.font_px,
           st.axis_color, "middle");
  svg.text(16.0, (y.px0 + y.px1) / 2.0, spec.y_label, st.font_px, st.axis_color, "middle",
           "rotate(-90 16.00 " + fmt_px((y.px0 + y.px1) / 2.0) + ")");
}

}  // namespace detail

struct RenderResult {
  std::string svg;
  nlohmann::json sidecar;  // every plotted coordinate, for programmatic checks
};

// ---------------------------------------------------------------------------
// Plot (a): model selection scatter with Pareto step frontier

inline RenderResult render_model_selection(const std::vector<TradeoffPoint>& points,
                                           const std::vector<TradeoffPoint>& frontier,
                                           const TradeoffPoint& best,
                                           const PlotSpec& spec = {}) {
  using namespace detail;
  spec.validate();
  if (points.empty()) raise(Errc::SchemaError, "no points to plot");
  if (frontier.empty()) raise(Errc::SchemaError, "empty frontier; refusing to draw an empty plot");

  double pmin = points[0].performance, pmax = pmin;
  double fmin = points[0].fairness, fmax = fmin;
  for (const auto& p : points) {
    pmin = std::min(pmin, p.performance);
    pmax = std::max(pmax, p.performance);
    fmin = std::min(fmin, p.fairness);
    fmax = std::max(fmax, p.fairness);
  }
  const AxisMap x = make_axis(spec.x_range, pmin, pmax, kMarginLeft, spec.width - kMarginRight);
  const AxisMap y = make_axis(spec.y_range, fmin, fmax, spec.height - kMarginBottom, kMarginTop);

  SvgBuilder svg(spec.width, spec.height);
  draw_axes(svg, x, y, spec);

  // step frontier: walk performance-descending, tracing the dominated corner
  std::vector<TradeoffPoint> steps = frontier;
  std::sort(steps.begin(), steps.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
    if (a.performance != b.performance) return a.performance > b.performance;
    return a.fairness < b.fairness;
  });
  std::string pts;
  nlohmann::json frontier_px = nlohmann::json::array();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double px = x.to_px(steps[i].performance);
    const double py = y.to_px(steps[i].fairness);
    if (i > 0) {
      const double prev_y = y.to_px(steps[i - 1].fairness);
      pts += " " + fmt_px(px) + "," + fmt_px(prev_y);
    }
    pts += (pts.empty() ? "" : " ") + fmt_px(px) + "," + fmt_px(py);
    frontier_px.push_back({{"performance", steps[i].performance},
                           {"fairness", steps[i].fairness},
                           {"px", px},
                           {"py", py}});
  }
  svg.raw("  <polyline class=\"frontier\" points=\"" + pts + "\" fill=\"none\" stroke=\"" +
          spec.style.frontier_color + "\" stroke-width=\"1.5\"/>\n");

  nlohmann::json points_px = nlohmann::json::array();
  for (const auto& p : points) {
    const double px = x.to_px(p.performance);
    const double py = y.to_px(p.fairness);
    svg.circle(px, py, spec.style.marker_radius, spec.style.point_color, "trial");
    points_px.push_back({{"performance", p.performance},
                         {"fairness", p.fairness},
                         {"dataset", p.trial_ref.dataset},
                         {"method", p.trial_ref.method},
                         {"trial_id", p.trial_ref.trial_id},
                         {"px", px},
                         {"py", py}});
  }

  // best trade-off: a diamond path (not a circle, keeping the circle count
  // equal to the trial count) with the trial reference in its title
  const double bx = x.to_px(best.performance);
  const double by = y.to_px(best.fairness);
  const double r = spec.style.best_radius;
  const std::string title = best.trial_ref.dataset + "/" + best.trial_ref.method +
                            "/trial_" + std::to_string(best.trial_ref.trial_id);
  svg.raw("  <path class=\"best\" d=\"M " + fmt_px(bx) + " " + fmt_px(by - r) + " L " +
          fmt_px(bx + r) + " " + fmt_px(by) + " L " + fmt_px(bx) + " " + fmt_px(by + r) +
          " L " + fmt_px(bx - r) + " " + fmt_px(by) + " Z\" fill=\"" + spec.style.best_color +
          "\"><title>" + xml_escape(title) + "</title></path>\n");

  RenderResult out;
  out.sidecar = {{"kind", "model_selection"},
                 {"x_axis", x.to_json()},
                 {"y_axis", y.to_json()},
                 {"points", points_px},
                 {"frontier", frontier_px},
                 {"best",
                  {{"performance", best.performance},
                   {"fairness", best.fairness},
                   {"dataset", best.trial_ref.dataset},
                   {"method", best.trial_ref.method},
                   {"trial_id", best.trial_ref.trial_id},
                   {"px", bx},
                   {"py", by}}}};
  out.svg = svg.finish();
  return out;
}

// ---------------------------------------------------------------------------
// Plot (b): method comparison with bootstrap error bars

inline RenderResult render_method_comparison(const std::vector<MethodSummary>& summaries,
                                             PlotSpec spec = {}) {
  using namespace detail;
  spec.validate();
  if (summaries.empty()) raise(Errc::SchemaError, "no method summaries to plot");
  if (spec.y_label == "fairness score") spec.y_label = "combined score";
  if (spec.x_label == "performance") spec.x_label = "method";

  std::vector<MethodSummary> ordered = summaries;
  std::sort(ordered.begin(), ordered.end(), [](const MethodSummary& a, const MethodSummary& b) {
    if (a.point_estimate != b.point_estimate) return a.point_estimate > b.point_estimate;
    return a.method < b.method;
  });

  double lo = ordered[0].ci_low, hi = ordered[0].ci_high;
  for (const auto& s : ordered) {
    lo = std::min(lo, s.ci_low);
    hi = std::max(hi, s.ci_high);
  }
  const AxisMap y = make_axis(spec.y_range, lo, hi, spec.height - kMarginBottom, kMarginTop);
  const double px0 = kMarginLeft, px1 = spec.width - kMarginRight;

  SvgBuilder svg(spec.width, spec.height);
  const PlotStyle& st = spec.style;
  svg.line(px0, y.px0, px1, y.px0, st.axis_color, 1.0, "axis");
  svg.line(px0, y.px0, px0, y.px1, st.axis_color, 1.0, "axis");
  for (double t : nice_ticks(y.lo, y.hi)) {
    const double py = y.to_px(t);
    svg.line(px0 - 4.0, py, px0, py, st.axis_color, 1.0, "tick");
    svg.text(px0 - 7.0, py + st.font_px * 0.35, fmt_tick(t), st.font_px, st.axis_color, "end");
  }
  svg.text((px0 + px1) / 2.0, spec.height - 14.0, spec.x_label, st.font_px, st.axis_color,
           "middle");
  svg.text(16.0, (y.px0 + y.px1) / 2.0, spec.y_label, st.font_px, st.axis_color, "middle",
           "rotate(-90 16.00 " + fmt_px((y.px0 + y.px1) / 2.0) + ")");

  nlohmann::json methods_px = nlohmann::json::array();
  const double slot = (px1 - px0) / static_cast<double>(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const MethodSummary& s = ordered[i];
    const double cx = px0 + (static_cast<double>(i) + 0.5) * slot;
    const double cy = y.to_px(s.point_estimate);
    const double y_lo = y.to_px(s.ci_low);
    const double y_hi = y.to_px(s.ci_high);
    svg.line(cx, y_lo, cx, y_hi, st.bar_color, 1.5, "errorbar");
    svg.circle(cx, cy, st.marker_radius + 0.5, st.bar_color, "marker",
               s.method + ": " + fmt_tick(s.point_estimate) + " [" + fmt_tick(s.ci_low) +
                   ", " + fmt_tick(s.ci_high) + "]");
    svg.text(cx, y.px0 + 16.0, s.method, st.font_px, st.axis_color, "middle");
    methods_px.push_back({{"method", s.method},
                          {"point_estimate", s.point_estimate},
                          {"ci_low", s.ci_low},
                          {"ci_high", s.ci_high},
                          {"x_px", cx},
                          {"y_px", cy},
                          {"y_lo_px", y_lo},
                          {"y_hi_px", y_hi}});
  }

  RenderResult out;
  out.sidecar = {{"kind", "method_comparison"},
                 {"y_axis", y.to_json()},
                 {"methods", methods_px}};
  out.svg = svg.finish();
  return out;
}

}  // namespace fairflow
