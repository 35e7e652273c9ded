#pragma once

#include <string>
#include <vector>

#include "evc/experiment.hpp"
#include "evc/io.hpp"

namespace evc {

namespace detail {

inline std::string svg_open(double width, double height) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(width) +
           "\" height=\"" + format_double(height) + "\" viewBox=\"0 0 " +
           format_double(width) + " " + format_double(height) + "\">\n";
}

inline std::string svg_rect(double x, double y, double w, double h,
                            const std::string& fill) {
    return "<rect x=\"" + format_double(x) + "\" y=\"" + format_double(y) +
           "\" width=\"" + format_double(w) + "\" height=\"" + format_double(h) +
           "\" fill=\"" + fill + "\"/>\n";
}

inline std::string svg_text(double x, double y, const std::string& text,
                            const std::string& anchor = "middle",
                            const std::string& size = "12") {
    return "<text x=\"" + format_double(x) + "\" y=\"" + format_double(y) +
           "\" font-family=\"sans-serif\" font-size=\"" + size + "\" text-anchor=\"" +
           anchor + "\">" + text + "</text>\n";
}

inline std::string svg_line(double x1, double y1, double x2, double y2) {
    return "<line x1=\"" + format_double(x1) + "\" y1=\"" + format_double(y1) +
           "\" x2=\"" + format_double(x2) + "\" y2=\"" + format_double(y2) +
           "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
}

} // namespace detail

/// Grouped bar chart of winner-provenance shares per batch size for
/// one selector. Expects this selector's per-size rows (pooled row
/// excluded) in increasing-N order.
inline std::string selection_rate_svg(const std::string& selector,
                                      const std::vector<MetricsRow>& rows) {
    const double margin_left = 60.0, margin_bottom = 50.0, margin_top = 40.0;
    const double plot_w = 80.0 * static_cast<double>(rows.empty() ? 1 : rows.size());
    const double plot_h = 220.0;
    const double width = margin_left + plot_w + 30.0;
    const double height = margin_top + plot_h + margin_bottom;
    const char* colors[3] = {"#4878cf", "#e8a33d", "#6aa84f"};
    const char* labels[3] = {"mle", "gamma-sweep", "imported"};

    std::string out = detail::svg_open(width, height);
    out += detail::svg_text(margin_left + plot_w / 2, 20.0,
                            "winner share by provenance: " + selector, "middle", "14");
    out += detail::svg_line(margin_left, margin_top, margin_left, margin_top + plot_h);
    out += detail::svg_line(margin_left, margin_top + plot_h, margin_left + plot_w,
                            margin_top + plot_h);
    for (int tick = 0; tick <= 4; ++tick) {
        double frac = 0.25 * tick;
        double y = margin_top + plot_h * (1.0 - frac);
        out += detail::svg_text(margin_left - 8.0, y + 4.0, format_double(frac), "end");
        out += detail::svg_line(margin_left - 4.0, y, margin_left, y);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double group_x = margin_left + 80.0 * static_cast<double>(i) + 10.0;
        double shares[3] = {rows[i].share_mle, rows[i].share_gamma_sweep,
                            rows[i].share_imported};
        for (int c = 0; c < 3; ++c) {
            double h = plot_h * shares[c];
            out += detail::svg_rect(group_x + 20.0 * c, margin_top + plot_h - h, 18.0, h,
                                    colors[c]);
        }
        out += detail::svg_text(group_x + 30.0, margin_top + plot_h + 18.0,
                                "N=" + std::to_string(rows[i].N));
    }
    for (int c = 0; c < 3; ++c) {
        double x = margin_left + 110.0 * c;
        double y = height - 14.0;
        out += detail::svg_rect(x, y - 10.0, 12.0, 12.0, colors[c]);
        out += detail::svg_text(x + 18.0, y, labels[c], "start");
    }
    out += "</svg>\n";
    return out;
}

/// Table figure of pooled performance-gap statistics, one row per
/// selector.
inline std::string delta_u_table_svg(const std::vector<MetricsRow>& pooled_rows) {
    const char* headers[5] = {"selector", "max", "mean", "median", "min"};
    const double col_w[5] = {150.0, 90.0, 90.0, 90.0, 90.0};
    const double row_h = 26.0;
    double width = 20.0;
    for (double w : col_w) width += w;
    double height = 60.0 + row_h * static_cast<double>(pooled_rows.size() + 1);

    std::string out = detail::svg_open(width, height);
    out += detail::svg_text(width / 2, 24.0,
                            "performance gap over baseline, pooled over batch sizes",
                            "middle", "14");
    double y = 50.0;
    double x = 10.0;
    for (int c = 0; c < 5; ++c) {
        out += detail::svg_text(x + 6.0, y, headers[c], "start", "13");
        x += col_w[c];
    }
    out += detail::svg_line(10.0, y + 8.0, width - 10.0, y + 8.0);
    for (const MetricsRow& row : pooled_rows) {
        y += row_h;
        x = 10.0;
        std::string cells[5] = {row.selector, format_double(row.du_max),
                                format_double(row.du_mean), format_double(row.du_median),
                                format_double(row.du_min)};
        for (int c = 0; c < 5; ++c) {
            out += detail::svg_text(x + 6.0, y, cells[c], "start");
            x += col_w[c];
        }
    }
    out += "</svg>\n";
    return out;
}

} // namespace evc
