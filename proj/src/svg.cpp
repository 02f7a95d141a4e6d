#include "embaudit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace embaudit {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string escape(const std::string& s) {
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

std::string channel_hex(double v) {
    const int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", byte);
    return buf;
}

// Fixed qualitative palette for scatter classes; cycles past its length.
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

SvgWriter::SvgWriter(double width, double height) : width_(width), height_(height) {}

void SvgWriter::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke, double stroke_width) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"";
    if (!stroke.empty()) {
        body_ += " stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) + "\"";
    }
    body_ += "/>\n";
}

void SvgWriter::circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + fill + "\"/>\n";
}

void SvgWriter::text(double x, double y, const std::string& content, double font_size,
                     const std::string& anchor) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" +
             num(font_size) + "\" font-family=\"monospace\" text-anchor=\"" + anchor +
             "\">" + escape(content) + "</text>\n";
}

void SvgWriter::line(double x1, double y1, double x2, double y2,
                     const std::string& stroke, double stroke_width) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
             "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             num(stroke_width) + "\"/>\n";
}

std::string SvgWriter::str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) +
           "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
           num(height_) + "\">\n" + body_ + "</svg>\n";
}

void SvgWriter::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("svg: cannot open " + path.string());
    const std::string s = str();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!out) throw std::runtime_error("svg: write failed for " + path.string());
}

std::string grey_hex(double v) {
    const std::string c = channel_hex(1.0 - v);
    return "#" + c + c + c;
}

std::string heat_hex(double v) {
    // White -> blue -> red ramp: low p-value intensity reads as hot.
    const double t = std::clamp(v, 0.0, 1.0);
    double r, g, b;
    if (t < 0.5) {
        const double u = t * 2.0;
        r = 1.0 - u * 0.8;
        g = 1.0 - u * 0.6;
        b = 1.0;
    } else {
        const double u = (t - 0.5) * 2.0;
        r = 0.2 + u * 0.8;
        g = 0.4 - u * 0.4;
        b = 1.0 - u;
    }
    return "#" + channel_hex(r) + channel_hex(g) + channel_hex(b);
}

void scatter_svg(const std::vector<double>& xy, std::size_t n,
                 const std::vector<int>& color_index, const std::filesystem::path& path,
                 double size) {
    if (n == 0 || xy.size() < 2 * n) {
        throw std::invalid_argument("scatter_svg: empty or short coordinate list");
    }
    double min_x = xy[0], max_x = xy[0], min_y = xy[1], max_y = xy[1];
    for (std::size_t i = 1; i < n; ++i) {
        min_x = std::min(min_x, xy[2 * i]);
        max_x = std::max(max_x, xy[2 * i]);
        min_y = std::min(min_y, xy[2 * i + 1]);
        max_y = std::max(max_y, xy[2 * i + 1]);
    }
    const double span_x = std::max(max_x - min_x, 1e-12);
    const double span_y = std::max(max_y - min_y, 1e-12);
    const double margin = size * 0.05;
    const double scale = (size - 2.0 * margin) / std::max(span_x, span_y);

    SvgWriter svg(size, size);
    svg.rect(0.0, 0.0, size, size, "#ffffff");
    constexpr std::size_t n_colors = sizeof(kPalette) / sizeof(kPalette[0]);
    for (std::size_t i = 0; i < n; ++i) {
        const double px = margin + (xy[2 * i] - min_x) * scale;
        // SVG y runs downward; flip so the plot reads math-style.
        const double py = size - margin - (xy[2 * i + 1] - min_y) * scale;
        const int c = i < color_index.size() ? color_index[i] : 0;
        svg.circle(px, py, 2.0,
                   kPalette[static_cast<std::size_t>(c < 0 ? 0 : c) % n_colors]);
    }
    svg.save(path);
}

}  // namespace embaudit
