#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace embaudit {

// Minimal deterministic SVG writer: fixed "%.4f" coordinate formatting so the
// same inputs always produce the same bytes.
class SvgWriter {
  public:
    SvgWriter(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double stroke_width = 0.0);
    void circle(double cx, double cy, double r, const std::string& fill);
    void text(double x, double y, const std::string& content, double font_size = 10.0,
              const std::string& anchor = "start");
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0);

    std::string str() const;
    void save(const std::filesystem::path& path) const;

  private:
    double width_;
    double height_;
    std::string body_;
};

// Greyscale hex color for v in [0, 1] (0 = white, 1 = black).
std::string grey_hex(double v);

// Blue->red diverging hex color for v in [0, 1].
std::string heat_hex(double v);

// 2-D scatter plot. Points colored by `color_index` into a fixed palette;
// the view box is fit to the data with a small margin.
void scatter_svg(const std::vector<double>& xy, std::size_t n,
                 const std::vector<int>& color_index,
                 const std::filesystem::path& path, double size = 800.0);

}  // namespace embaudit
