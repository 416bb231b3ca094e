#include "claimsfpr/svg.hpp"

#include "claimsfpr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace claimsfpr::svg {

namespace {

constexpr double kPanelWidth = 480.0;
constexpr double kPanelHeight = 360.0;
constexpr double kTitleHeight = 30.0;
constexpr double kMarginLeft = 72.0;
constexpr double kMarginRight = 18.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 48.0;

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
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

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    bool empty() const { return !(lo <= hi); }
};

std::vector<double> nice_ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (span / step <= 6.0) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return ticks;
}

std::string tick_label(double v) {
    return fmt::format("{:g}", v);
}

class PanelWriter {
public:
    PanelWriter(const Panel& panel, double x0) : panel_(panel), x0_(x0) {
        Range xr, yr;
        auto add_y = [&](double v) {
            if (panel_.log_y) {
                if (v > 0.0) yr.add(std::log10(v));
            } else {
                yr.add(v);
            }
        };
        for (const auto& b : panel.bands) {
            for (double v : b.x) xr.add(v);
            for (double v : b.lo) add_y(v);
            for (double v : b.hi) add_y(v);
        }
        for (const auto& b : panel.bars) {
            for (double v : b.edges) xr.add(v);
            for (double v : b.counts) add_y(v);
            add_y(0.0);
        }
        for (const auto& s : panel.series) {
            for (double v : s.x) xr.add(v);
            for (double v : s.y) add_y(v);
        }
        if (panel.y_from_zero && !panel.log_y) yr.add(0.0);
        if (xr.empty()) xr = {0.0, 1.0};
        if (yr.empty()) yr = {0.0, 1.0};
        if (xr.hi == xr.lo) xr = {xr.lo - 0.5, xr.hi + 0.5};
        if (yr.hi == yr.lo) yr = {yr.lo - 0.5, yr.hi + 0.5};
        const double xpad = 0.03 * (xr.hi - xr.lo);
        const double ypad = 0.05 * (yr.hi - yr.lo);
        x_ = {xr.lo - xpad, xr.hi + xpad};
        y_ = {panel.y_from_zero && !panel.log_y && yr.lo >= 0.0 ? yr.lo : yr.lo - ypad, yr.hi + ypad};
    }

    double px(double x) const {
        return x0_ + kMarginLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_width();
    }
    double py(double y) const {
        const double v = panel_.log_y ? std::log10(y) : y;
        return kTitleHeight + kMarginTop + (1.0 - (v - y_.lo) / (y_.hi - y_.lo)) * plot_height();
    }
    static double plot_width() { return kPanelWidth - kMarginLeft - kMarginRight; }
    static double plot_height() { return kPanelHeight - kMarginTop - kMarginBottom; }

    void write(std::string& out) const {
        const double left = x0_ + kMarginLeft;
        const double top = kTitleHeight + kMarginTop;
        fmt::format_to(std::back_inserter(out),
                       "<g class=\"panel\">\n<rect class=\"plot-area\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
                       "height=\"{:.2f}\" fill=\"none\" stroke=\"#444\"/>\n",
                       left, top, plot_width(), plot_height());
        fmt::format_to(std::back_inserter(out),
                       "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                       left + plot_width() / 2, top - 12, escape(panel_.title));
        write_axes(out, left, top);

        for (const auto& b : panel_.bands) {
            std::string pts;
            for (std::size_t k = 0; k < b.x.size(); ++k) pts += fmt::format("{:.2f},{:.2f} ", px(b.x[k]), py(b.hi[k]));
            for (std::size_t k = b.x.size(); k-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", px(b.x[k]), py(b.lo[k]));
            fmt::format_to(std::back_inserter(out),
                           "<polygon class=\"band\" points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
                           pts, b.color, b.opacity);
        }
        for (const auto& b : panel_.bars) {
            for (std::size_t k = 0; k < b.counts.size(); ++k) {
                const double x1 = px(b.edges[k]);
                const double x2 = px(b.edges[k + 1]);
                const double y1 = py(b.counts[k]);
                const double y0 = py(panel_.log_y ? std::pow(10.0, y_.lo) : std::max(0.0, y_.lo));
                fmt::format_to(std::back_inserter(out),
                               "<rect class=\"bar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                               "fill=\"{}\" stroke=\"#fff\" stroke-width=\"0.5\"/>\n",
                               x1, y1, std::max(0.0, x2 - x1), std::max(0.0, y0 - y1), b.color);
            }
        }
        for (const auto& s : panel_.series) {
            if (s.points) {
                for (std::size_t k = 0; k < s.x.size(); ++k) {
                    if (!std::isfinite(s.y[k]) || (panel_.log_y && s.y[k] <= 0.0)) continue;
                    fmt::format_to(std::back_inserter(out),
                                   "<circle class=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\" "
                                   "fill-opacity=\"{}\"/>\n",
                                   s.css_class, px(s.x[k]), py(s.y[k]), s.color, s.opacity);
                }
            } else {
                std::string pts;
                for (std::size_t k = 0; k < s.x.size(); ++k) {
                    if (!std::isfinite(s.y[k]) || (panel_.log_y && s.y[k] <= 0.0)) continue;
                    pts += fmt::format("{:.2f},{:.2f} ", px(s.x[k]), py(s.y[k]));
                }
                if (!pts.empty()) pts.pop_back();
                fmt::format_to(std::back_inserter(out),
                               "<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" "
                               "stroke-opacity=\"{}\"/>\n",
                               s.css_class, pts, s.color, s.width, s.opacity);
            }
        }
        write_legend(out, left, top);
        out += "</g>\n";
    }

private:
    void write_axes(std::string& out, double left, double top) const {
        const double bottom = top + plot_height();
        for (double t : nice_ticks(x_.lo, x_.hi)) {
            const double x = px(t);
            fmt::format_to(std::back_inserter(out),
                           "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#444\"/>\n"
                           "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\" font-size=\"11\">{4}</text>\n",
                           x, bottom, bottom + 5, bottom + 18, tick_label(t));
        }
        std::vector<double> yticks;
        if (panel_.log_y) {
            for (double e = std::ceil(y_.lo); e <= y_.hi; e += 1.0) yticks.push_back(e);
        } else {
            yticks = nice_ticks(y_.lo, y_.hi);
        }
        for (double t : yticks) {
            const double value = panel_.log_y ? std::pow(10.0, t) : t;
            const double y = py(value);
            fmt::format_to(std::back_inserter(out),
                           "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#444\"/>\n"
                           "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\" font-size=\"11\">{5}</text>\n",
                           left - 5, y, left, left - 8, y + 4, tick_label(value));
        }
        fmt::format_to(std::back_inserter(out),
                       "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
                       left + plot_width() / 2, bottom + 38, escape(panel_.x_label));
        fmt::format_to(std::back_inserter(out),
                       "<text transform=\"translate({:.2f},{:.2f}) rotate(-90)\" text-anchor=\"middle\" "
                       "font-size=\"12\">{}</text>\n",
                       left - 56, top + plot_height() / 2, escape(panel_.y_label));
    }

    void write_legend(std::string& out, double left, double top) const {
        double y = top + 14;
        for (const auto& s : panel_.series) {
            if (s.label.empty()) continue;
            fmt::format_to(std::back_inserter(out),
                           "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n"
                           "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n",
                           left + 8, y - 9, s.color, left + 22, y, escape(s.label));
            y += 15;
        }
    }

    const Panel& panel_;
    double x0_;
    Range x_;
    Range y_;
};

}  // namespace

std::string render(const std::string& title, std::span<const Panel> panels) {
    const double width = kPanelWidth * static_cast<double>(std::max<std::size_t>(1, panels.size()));
    const double height = kPanelHeight + kTitleHeight;
    std::string out;
    fmt::format_to(std::back_inserter(out),
                   "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
                   "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
                   "viewBox=\"0 0 {0:.0f} {1:.0f}\" font-family=\"sans-serif\">\n"
                   "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
                   "<text x=\"{2:.0f}\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">{3}</text>\n",
                   width, height, width / 2, escape(title));
    for (std::size_t k = 0; k < panels.size(); ++k) {
        PanelWriter(panels[k], kPanelWidth * static_cast<double>(k)).write(out);
    }
    out += "</svg>\n";
    return out;
}

Bars histogram(std::span<const double> values, int bins, std::string color) {
    if (bins < 1) throw Error("svg", "histogram needs at least one bin");
    Bars bars;
    bars.color = std::move(color);
    if (values.empty()) return bars;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn, hi = *mx;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double w = (hi - lo) / bins;
    for (int k = 0; k <= bins; ++k) bars.edges.push_back(lo + w * k);
    bars.counts.assign(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        auto k = static_cast<int>((v - lo) / w);
        k = std::clamp(k, 0, bins - 1);
        bars.counts[static_cast<std::size_t>(k)] += 1.0;
    }
    return bars;
}

}  // namespace claimsfpr::svg
