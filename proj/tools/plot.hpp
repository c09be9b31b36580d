#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace geopre::cli {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// RGB raster with just enough drawing for static result plots.
class Image {
 public:
  Image(int w, int h, Rgb bg = {255, 255, 255});

  int width() const { return w_; }
  int height() const { return h_; }
  void set(int x, int y, Rgb c);
  void line(int x0, int y0, int x1, int y1, Rgb c);
  void fill(int x0, int y0, int x1, int y1, Rgb c);
  /// 5x7 bitmap glyphs; lower case prints as upper case.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 1);
  static int text_width(const std::string& s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }

  void write_png(const std::filesystem::path& path) const;

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

struct Series {
  std::string label;
  std::vector<double> x, y;
};

void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
               const std::vector<Series>& series, bool log_y);

struct Bar {
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

/// Bars with +-std whiskers.
void bar_plot(const std::filesystem::path& path, const std::string& title, const std::vector<Bar>& bars);

struct FieldPanel {
  std::string title;
  Eigen::MatrixX2d points;
  Eigen::VectorXd values;
};

/// Side-by-side scatter images of scalar fields on [0,1]^2. Panels sharing
/// `shared_range` use one colour scale.
void field_plot(const std::filesystem::path& path, const std::vector<FieldPanel>& panels, int shared_range);

Rgb palette(int i);
/// Perceptual blue-to-yellow ramp on t in [0, 1].
Rgb colormap(double t);

}  // namespace geopre::cli
