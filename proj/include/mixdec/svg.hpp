#pragma once

// Static SVG plots: coverings coloured by cyclic class, manifold polylines with
// crossing markers, and before/after ball diagrams for surgery. Spatial plots
// exist for d <= 2 only; the functions return nullopt otherwise.

#include "mixdec/covering.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/periodic.hpp"
#include "mixdec/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mixdec {

namespace svg {

inline const char* colour(std::size_t i) {
    static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

/// Maps a data window onto a fixed canvas; y grows upwards in data space.
class Canvas {
public:
    Canvas(double x0, double x1, double y0, double y1, double width = 600, double height = 600)
        : x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(height) {
        out_.precision(6);
        out_ << std::fixed;
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ + 2 * margin << "\" height=\""
             << h_ + 2 * margin << "\">\n";
        out_ << "<rect x=\"0\" y=\"0\" width=\"" << w_ + 2 * margin << "\" height=\"" << h_ + 2 * margin
             << "\" fill=\"white\"/>\n";
    }

    double px(double x) const { return margin + (x - x0_) / (x1_ - x0_) * w_; }
    double py(double y) const { return margin + (1.0 - (y - y0_) / (y1_ - y0_)) * h_; }
    double sx(double dx) const { return dx / (x1_ - x0_) * w_; }
    double sy(double dy) const { return dy / (y1_ - y0_) * h_; }

    void rect(double xa, double ya, double xb, double yb, const std::string& fill, const std::string& stroke = "none",
              double opacity = 1.0) {
        out_ << "<rect x=\"" << px(xa) << "\" y=\"" << py(yb) << "\" width=\"" << sx(xb - xa) << "\" height=\""
             << sy(yb - ya) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" fill-opacity=\"" << opacity
             << "\"/>\n";
    }

    void circle(double x, double y, double r_px, const std::string& fill, const std::string& stroke = "none") {
        out_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r_px << "\" fill=\"" << fill
             << "\" stroke=\"" << stroke << "\"/>\n";
    }

    void ellipse(double x, double y, double rx, double ry, const std::string& stroke) {
        out_ << "<ellipse cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" rx=\"" << std::max(1.5, sx(rx))
             << "\" ry=\"" << std::max(1.5, sy(ry)) << "\" fill=\"none\" stroke=\"" << stroke << "\"/>\n";
    }

    void line(double xa, double ya, double xb, double yb, const std::string& stroke, double width = 1.0) {
        out_ << "<line x1=\"" << px(xa) << "\" y1=\"" << py(ya) << "\" x2=\"" << px(xb) << "\" y2=\"" << py(yb)
             << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
    }

    /// Polyline split wherever consecutive points are far apart (torus wrap).
    void polyline(const std::vector<Vec>& pts, const std::string& stroke, double jump) {
        bool open = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i > 0 && (pts[i] - pts[i - 1]).norm() > jump) {
                out_ << "\"/>\n";
                open = false;
            }
            if (!open) {
                out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1\" points=\"";
                open = true;
            }
            out_ << px(pts[i][0]) << ',' << py(pts[i][1]) << ' ';
        }
        if (open) out_ << "\"/>\n";
    }

    void text(double x, double y, const std::string& s) {
        out_ << "<text x=\"" << px(x) << "\" y=\"" << py(y) << "\" font-size=\"12\" font-family=\"sans-serif\">" << s
             << "</text>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

    static constexpr double margin = 20.0;

private:
    double x0_, x1_, y0_, y1_, w_, h_;
    std::ostringstream out_;
};

}  // namespace svg

/// Boxes coloured by cyclic class (one colour per cyclic class of each
/// recurrent class); boxes outside every class are left light grey. In d = 1
/// boxes are drawn as vertical bands.
inline std::optional<std::string> covering_svg(const BoxCovering& cov, const std::vector<CyclicDecomposition>& decs) {
    const Domain& dom = cov.domain();
    const int d = dom.dimension();
    if (d > 2) return std::nullopt;
    std::map<NodeId, std::size_t> colour;
    std::size_t next = 0;
    for (const auto& dec : decs)
        for (const auto& piece : dec.classes) {
            for (NodeId u : piece) colour[u] = next;
            ++next;
        }
    const double y0 = d == 2 ? dom.lo[1] : 0.0, y1 = d == 2 ? dom.hi[1] : 1.0;
    svg::Canvas c(dom.lo[0], dom.hi[0], y0, y1, 600, d == 2 ? 600 : 120);
    for (NodeId id = 0; id < cov.size(); ++id) {
        const Box b = cov.box(id);
        const double ya = d == 2 ? b.lo[1] : y0, yb = d == 2 ? b.hi[1] : y1;
        auto it = colour.find(id);
        c.rect(b.lo[0], ya, b.hi[0], yb, it == colour.end() ? "#eeeeee" : svg::colour(it->second), "none");
    }
    return c.finish();
}

/// Manifold polylines (unstable red, stable blue) and crossing markers.
inline std::optional<std::string> manifolds_svg(const Domain& dom, const std::vector<ManifoldCurve>& curves,
                                                const std::vector<Vec>& crossings, const std::vector<Vec>& anchors) {
    if (dom.dimension() != 2) return std::nullopt;
    svg::Canvas c(dom.lo[0], dom.hi[0], dom.lo[1], dom.hi[1]);
    c.rect(dom.lo[0], dom.lo[1], dom.hi[0], dom.hi[1], "none", "#999999");
    const double jump = 0.25 * std::min(dom.width(0), dom.width(1));
    for (const auto& curve : curves)
        c.polyline(curve.points, curve.stability == Stability::unstable ? "#d62728" : "#1f77b4", jump);
    for (const auto& x : crossings) c.circle(x[0], x[1], 3.0, "black");
    for (const auto& x : anchors) c.circle(x[0], x[1], 5.0, "none", "#2ca02c");
    return c.finish();
}

/// Before/after diagram of a surgery: tiles of the first chart, the input
/// pseudo-orbit points (top row / left panel) and the final points with their
/// level-0 balls (bottom row / right panel). Ball radii are drawn at no less
/// than 1.5 px so that tiny balls stay visible.
inline std::optional<std::string> surgery_svg(const Domain& space, const PerturbationDomain& dom,
                                              const PseudoOrbit& before, const SurgeryResult& after) {
    const int d = space.dimension();
    if (d > 2 || dom.charts.empty()) return std::nullopt;
    const Chart& ch = dom.charts.front();
    const Vec pad = 0.05 * (ch.hi - ch.lo);
    const Vec lo = ch.lo - pad, hi = ch.hi + pad;
    auto near_chart = [&](const Vec& x) {
        const Vec u = space.displacement(ch.center(), x).cwiseAbs();
        return (u.array() <= (ch.half_widths() + pad).array()).all();
    };
    auto local = [&](const Vec& x) { return Vec(ch.center() + space.displacement(ch.center(), x)); };

    if (d == 1) {
        svg::Canvas c(lo[0], hi[0], 0.0, 2.0, 800, 200);
        for (const auto& t : dom.tiles) {
            if (t.chart != 0) continue;
            for (double row : {0.0, 1.0}) c.rect(t.center[0] - t.half_edge, row + 0.2, t.center[0] + t.half_edge,
                                                   row + 0.8, "#f4f4f4", "#bbbbbb");
        }
        for (std::size_t i = 0; i < before.points.size(); ++i) {
            if (!near_chart(before.points[i])) continue;
            c.circle(local(before.points[i])[0], 1.5, 2.0, before.jumps[i] ? "#d62728" : "#333333");
        }
        for (const auto& s : after.sequences) {
            if (!near_chart(s.points.front())) continue;
            const double x = local(s.points.front())[0];
            c.circle(x, 0.5, 2.0, s.jump ? "#d62728" : "#333333");
            if (!s.radii.empty() && s.radii.front() > 0.0) c.ellipse(x, 0.5, s.radii.front(), 0.2, "#1f77b4");
        }
        c.text(lo[0], 1.9, "before");
        c.text(lo[0], 0.9, "after");
        return c.finish();
    }

    const double width = hi[0] - lo[0];
    svg::Canvas c(lo[0], lo[0] + 2.2 * width, lo[1], hi[1], 1100, 500);
    const double shift = 1.2 * width;
    for (double off : {0.0, shift})
        for (const auto& t : dom.tiles) {
            if (t.chart != 0) continue;
            c.rect(t.center[0] - t.half_edge + off, t.center[1] - t.half_edge, t.center[0] + t.half_edge + off,
                   t.center[1] + t.half_edge, "#f4f4f4", "#bbbbbb");
        }
    for (std::size_t i = 0; i < before.points.size(); ++i) {
        if (!near_chart(before.points[i])) continue;
        const Vec x = local(before.points[i]);
        c.circle(x[0], x[1], 2.0, before.jumps[i] ? "#d62728" : "#333333");
    }
    for (const auto& s : after.sequences) {
        if (!near_chart(s.points.front())) continue;
        const Vec x = local(s.points.front());
        c.circle(x[0] + shift, x[1], 2.0, s.jump ? "#d62728" : "#333333");
        if (!s.radii.empty() && s.radii.front() > 0.0)
            c.ellipse(x[0] + shift, x[1], s.radii.front(), s.radii.front(), "#1f77b4");
    }
    c.text(lo[0], hi[1], "before");
    c.text(lo[0] + shift, hi[1], "after");
    return c.finish();
}

}  // namespace mixdec
