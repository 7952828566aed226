#include "cotlab/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cotlab/errors.hpp"

namespace cotlab::cli {

namespace {

constexpr double kW = 640.0, kH = 400.0;
constexpr double kMargin = 48.0;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct Axes {
    double x0, x1, y0, y1;

    double px(double x) const {
        return kMargin + (x - x0) / (x1 - x0 + 1e-12) * (kW - 2 * kMargin);
    }
    double py(double y) const {
        return kH - kMargin - (y - y0) / (y1 - y0 + 1e-12) * (kH - 2 * kMargin);
    }
};

void svg_open(std::string& s, const std::string& title) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kW) + "\" height=\"" +
         fmt(kH) + "\" viewBox=\"0 0 " + fmt(kW) + " " + fmt(kH) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(kW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         title + "</text>\n";
}

void axes_frame(std::string& s, const Axes& a, const std::string& xlabel,
                const std::string& ylabel) {
    s += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kH - kMargin) + "\" x2=\"" +
         fmt(kW - kMargin) + "\" y2=\"" + fmt(kH - kMargin) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kMargin) + "\" x2=\"" + fmt(kMargin) +
         "\" y2=\"" + fmt(kH - kMargin) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = a.x0 + (a.x1 - a.x0) * i / 4.0;
        const double fy = a.y0 + (a.y1 - a.y0) * i / 4.0;
        s += "<text x=\"" + fmt(a.px(fx)) + "\" y=\"" + fmt(kH - kMargin + 16) +
             "\" text-anchor=\"middle\" font-size=\"10\">" + fmt(fx) + "</text>\n";
        s += "<text x=\"" + fmt(kMargin - 6) + "\" y=\"" + fmt(a.py(fy) + 3) +
             "\" text-anchor=\"end\" font-size=\"10\">" + fmt(fy) + "</text>\n";
    }
    s += "<text x=\"" + fmt(kW / 2) + "\" y=\"" + fmt(kH - 8) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + xlabel + "</text>\n";
    s += "<text x=\"14\" y=\"" + fmt(kH / 2) + "\" text-anchor=\"middle\" font-size=\"12\" " +
         "transform=\"rotate(-90 14 " + fmt(kH / 2) + ")\">" + ylabel + "</text>\n";
}

void polyline(std::string& s, const Axes& a, const std::vector<double>& ys,
              const std::string& color) {
    if (ys.empty()) return;
    s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (i) s += " ";
        s += fmt(a.px(static_cast<double>(i))) + "," + fmt(a.py(ys[i]));
    }
    s += "\"/>\n";
}

void legend(std::string& s, const std::vector<std::pair<std::string, std::string>>& entries) {
    double y = kMargin + 4;
    for (const auto& [name, color] : entries) {
        s += "<rect x=\"" + fmt(kW - kMargin - 150) + "\" y=\"" + fmt(y - 8) +
             "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
        s += "<text x=\"" + fmt(kW - kMargin - 136) + "\" y=\"" + fmt(y) +
             "\" font-size=\"11\">" + name + "</text>\n";
        y += 16;
    }
}

std::vector<double> windowed(const std::vector<double>& xs, std::size_t window) {
    if (xs.size() < window || window == 0) return xs;
    std::vector<double> out;
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += xs[i];
    for (std::size_t i = 0;; ++i) {
        out.push_back(acc / static_cast<double>(window));
        if (i + window >= xs.size()) break;
        acc += xs[i + window] - xs[i];
    }
    return out;
}

}  // namespace

std::string svg_curves(const train::TrainingCurves& curves, std::size_t window) {
    std::string s;
    svg_open(s, "training curves");
    Axes a{0.0, static_cast<double>(std::max<std::size_t>(curves.size(), 2) - 1), 0.0, 1.0};
    axes_frame(s, a, "episode", "windowed rate");
    polyline(s, a, windowed(curves.provided, window), "#1f77b4");
    polyline(s, a, windowed(curves.holdout, window), "#d62728");
    polyline(s, a, windowed(curves.detection, window), "#2ca02c");
    legend(s, {{"provided", "#1f77b4"}, {"holdout", "#d62728"}, {"detection", "#2ca02c"}});
    s += "</svg>\n";
    return s;
}

std::string svg_pareto(const nlohmann::ordered_json& rep) {
    const auto& methods = rep.at("methods");
    double xmax = 1e-9, ymin = 0.0, ymax = 1e-9;
    for (const auto& m : methods) {
        xmax = std::max(xmax, m.at("pareto").at("duration_mean").get<double>());
        const double c = m.at("pareto").at("capability_score").get<double>();
        ymin = std::min(ymin, c);
        ymax = std::max(ymax, c);
    }
    std::string s;
    svg_open(s, "capability vs monitorability duration");
    Axes a{0.0, xmax * 1.1 + 1e-9, ymin * 1.1 - 1e-6, ymax * 1.1 + 1e-6};
    axes_frame(s, a, "monitorability duration (episodes)", "capability (holdout slope)");
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                            "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t idx = 0;
    for (const auto& m : methods) {
        const std::string color = colors[idx % 8];
        const double x = m.at("pareto").at("duration_mean").get<double>();
        const double y = m.at("pareto").at("capability_score").get<double>();
        s += "<circle cx=\"" + fmt(a.px(x)) + "\" cy=\"" + fmt(a.py(y)) +
             "\" r=\"5\" fill=\"" + color + "\"/>\n";
        entries.push_back({m.at("method").get<std::string>(), color});
        ++idx;
    }
    legend(s, entries);
    s += "</svg>\n";
    return s;
}

std::string svg_intervals(const nlohmann::ordered_json& rep) {
    struct Item {
        std::string name;
        double value, lo, hi;
    };
    std::vector<Item> items;
    const std::string kind = rep.at("report").get<std::string>();
    if (kind == "no-cot-eval") {
        for (const auto& m : rep.at("modes")) {
            items.push_back({m.at("mode").get<std::string>(), m.at("accuracy").get<double>(),
                             m.at("ci")[0].get<double>(), m.at("ci")[1].get<double>()});
        }
    } else if (kind == "transfer-eval") {
        for (const auto& [name, arm] : rep.at("arms").items()) {
            const auto& steps = arm.at("steps");
            double mu = 0.0, mx = 0.0;
            for (const auto& v : steps) {
                mu += v.get<double>();
                mx = std::max(mx, v.get<double>());
            }
            mu /= std::max<std::size_t>(steps.size(), 1);
            items.push_back({name, mu, mu, mx});
        }
    } else {
        throw ConfigError("no interval plotter for report type " + kind);
    }
    double ymax = 1e-9;
    for (const auto& it : items) ymax = std::max(ymax, it.hi);
    std::string s;
    svg_open(s, kind);
    Axes a{-0.5, static_cast<double>(items.size()) - 0.5, 0.0, ymax * 1.15 + 1e-9};
    axes_frame(s, a, "", "value");
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double x = a.px(static_cast<double>(i));
        s += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(a.py(items[i].lo)) + "\" x2=\"" + fmt(x) +
             "\" y2=\"" + fmt(a.py(items[i].hi)) + "\" stroke=\"#1f77b4\"/>\n";
        s += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(a.py(items[i].value)) +
             "\" r=\"4\" fill=\"#1f77b4\"/>\n";
        s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kH - kMargin + 28) +
             "\" text-anchor=\"middle\" font-size=\"9\">" + items[i].name + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string svg_for_report(const nlohmann::ordered_json& report) {
    const std::string kind = report.at("report").get<std::string>();
    if (kind == "monitorability-bench") return svg_pareto(report);
    if (kind == "no-cot-eval" || kind == "transfer-eval") return svg_intervals(report);
    throw ConfigError("no plotter for report type " + kind);
}

}  // namespace cotlab::cli
