#pragma once

#include <span>
#include <string>
#include <vector>

namespace claimsfpr::svg {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool points = false;
    std::string css_class = "series";
    double width = 1.5;
    double opacity = 1.0;
    std::string label;
};

struct Band {
    std::vector<double> x;
    std::vector<double> lo;
    std::vector<double> hi;
    std::string color = "#1f77b4";
    double opacity = 0.25;
};

/// Histogram bars over bin edges (edges.size() == counts.size() + 1).
struct Bars {
    std::vector<double> edges;
    std::vector<double> counts;
    std::string color = "#1f77b4";
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    bool y_from_zero = false;
    std::vector<Band> bands;
    std::vector<Bars> bars;
    std::vector<Series> series;
};

/// Standalone SVG 1.1 document with the panels side by side. Axis ranges
/// enclose every plotted value.
std::string render(const std::string& title, std::span<const Panel> panels);

/// Equal-width histogram of `values` over [min, max].
Bars histogram(std::span<const double> values, int bins, std::string color);

}  // namespace claimsfpr::svg
