#include "plot.hpp"

#include "geopre/common/error.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>

namespace geopre::cli {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> f = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},                {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
      {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},       {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
      {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},       {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
      {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},                {'*', {0, 0x04, 0x15, 0x0E, 0x15, 0x04, 0}},
      {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},             {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'|', {0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'\'', {0x0C, 0x04, 0x08, 0, 0, 0, 0}},
  };
  return f;
}

const Rgb kBlack{0, 0, 0};
const Rgb kGrid{225, 225, 225};

std::string tick(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4))
    std::snprintf(buf, sizeof buf, "%.1e", v);
  else
    std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  int x0, y0, x1, y1;  // plot area in pixels, y0 top
  double xmin, xmax, ymin, ymax;
  int px(double x) const { return x0 + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (x1 - x0))); }
  int py(double y) const { return y1 - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (y1 - y0))); }
};

void axes(Image& img, const Frame& f, bool log_y, const std::string& title, const std::string& xlabel) {
  img.text(f.x0, 8, title, kBlack, 2);
  for (int k = 0; k <= 4; ++k) {
    const double yv = f.ymin + (f.ymax - f.ymin) * k / 4.0;
    const int y = f.py(yv);
    img.line(f.x0, y, f.x1, y, kGrid);
    const std::string s = tick(log_y ? std::pow(10.0, yv) : yv);
    img.text(f.x0 - Image::text_width(s) - 4, y - 3, s, kBlack);
    const double xv = f.xmin + (f.xmax - f.xmin) * k / 4.0;
    const int x = f.px(xv);
    const std::string t = tick(xv);
    img.text(x - Image::text_width(t) / 2, f.y1 + 6, t, kBlack);
  }
  img.line(f.x0, f.y0, f.x0, f.y1, kBlack);
  img.line(f.x0, f.y1, f.x1, f.y1, kBlack);
  if (!xlabel.empty()) img.text((f.x0 + f.x1 - Image::text_width(xlabel)) / 2, f.y1 + 20, xlabel, kBlack);
}

}  // namespace

Image::Image(int w, int h, Rgb bg) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < px_.size(); i += 3) {
    px_[i] = bg.r;
    px_[i + 1] = bg.g;
    px_[i + 2] = bg.b;
  }
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

void Image::line(int x0, int y0, int x1, int y1, Rgb c) {
  // Bresenham.
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Image::fill(int x0, int y0, int x1, int y1, Rgb c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) set(x, y, c);
}

void Image::text(int x, int y, const std::string& s, Rgb c, int scale) {
  const auto& f = font();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto it = f.find(static_cast<char>(std::toupper(static_cast<unsigned char>(s[i]))));
    if (it == f.end()) continue;
    const int ox = x + static_cast<int>(i) * 6 * scale;
    for (int row = 0; row < 7; ++row)
      for (int col = 0; col < 5; ++col)
        if (it->second[row] & (0x10 >> col)) fill(ox + col * scale, y + row * scale, ox + col * scale + scale - 1,
                                                  y + row * scale + scale - 1, c);
  }
}

void Image::write_png(const std::filesystem::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  require(fp != nullptr, Errc::io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h_; ++y) png_write_row(png, &px_[static_cast<std::size_t>(y) * w_ * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Rgb palette(int i) {
  static const Rgb colors[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                               {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127}};
  return colors[i % 8];
}

Rgb colormap(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  // Piecewise-linear through a few viridis anchor colours.
  static const double anchors[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  const double s = t * 4.0;
  const int k = std::min(3, static_cast<int>(s));
  const double u = s - k;
  auto mix = [&](int c) { return static_cast<std::uint8_t>(std::lround(anchors[k][c] * (1 - u) + anchors[k + 1][c] * u)); };
  return {mix(0), mix(1), mix(2)};
}

void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
               const std::vector<Series>& series, bool log_y) {
  Image img(800, 500);
  Frame f{90, 40, 600, 440, 0, 1, 0, 1};
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  auto tr = [&](double y) { return log_y ? std::log10(std::max(y, 1e-12)) : y; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, tr(s.y[i]));
      ymax = std::max(ymax, tr(s.y[i]));
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  f.xmin = xmin, f.xmax = xmax, f.ymin = ymin, f.ymax = ymax;
  axes(img, f, log_y, title, xlabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const Rgb c = palette(static_cast<int>(k));
    for (std::size_t i = 1; i < s.x.size(); ++i)
      img.line(f.px(s.x[i - 1]), f.py(tr(s.y[i - 1])), f.px(s.x[i]), f.py(tr(s.y[i])), c);
    const int ly = 50 + static_cast<int>(k) * 14;
    img.fill(615, ly, 630, ly + 6, c);
    img.text(636, ly, s.label.substr(0, 26), kBlack);
  }
  img.write_png(path);
}

void bar_plot(const std::filesystem::path& path, const std::string& title, const std::vector<Bar>& bars) {
  Image img(std::max(400, 120 + static_cast<int>(bars.size()) * 90), 480);
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.mean + b.std);
  if (!(top > 0)) top = 1.0;
  Frame f{90, 40, img.width() - 30, 400, 0, 1, 0, top * 1.1};
  axes(img, f, false, title, "");
  const double slot = static_cast<double>(f.x1 - f.x0) / std::max<std::size_t>(bars.size(), 1);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int cx = f.x0 + static_cast<int>((i + 0.5) * slot);
    const int half = static_cast<int>(slot * 0.3);
    img.fill(cx - half, f.py(bars[i].mean), cx + half, f.y1 - 1, palette(static_cast<int>(i)));
    if (bars[i].std > 0) {
      const int ylo = f.py(bars[i].mean - bars[i].std), yhi = f.py(bars[i].mean + bars[i].std);
      img.line(cx, ylo, cx, yhi, kBlack);
      img.line(cx - 5, ylo, cx + 5, ylo, kBlack);
      img.line(cx - 5, yhi, cx + 5, yhi, kBlack);
    }
    const std::string label = bars[i].label.substr(0, static_cast<std::size_t>(slot / 6));
    img.text(cx - Image::text_width(label) / 2, f.y1 + 22, label, kBlack);
  }
  img.write_png(path);
}

void field_plot(const std::filesystem::path& path, const std::vector<FieldPanel>& panels, int shared_range) {
  const int size = 320, pad = 30;
  Image img(pad + static_cast<int>(panels.size()) * (size + pad), size + 90);
  double smin = std::numeric_limits<double>::infinity(), smax = -smin;
  for (int i = 0; i < std::min<int>(shared_range, panels.size()); ++i) {
    smin = std::min(smin, panels[i].values.minCoeff());
    smax = std::max(smax, panels[i].values.maxCoeff());
  }
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const auto& p = panels[i];
    const bool shared = static_cast<int>(i) < shared_range;
    const double lo = shared ? smin : p.values.minCoeff();
    double hi = shared ? smax : p.values.maxCoeff();
    if (!(hi > lo)) hi = lo + 1;
    const int ox = pad + static_cast<int>(i) * (size + pad), oy = 40;
    img.text(ox, 12, p.title, kBlack, 2);
    img.fill(ox, oy, ox + size, oy + size, {235, 235, 235});
    for (Eigen::Index k = 0; k < p.points.rows(); ++k) {
      const int x = ox + static_cast<int>(p.points(k, 0) * size);
      const int y = oy + size - static_cast<int>(p.points(k, 1) * size);
      img.fill(x - 1, y - 1, x + 1, y + 1, colormap((p.values[k] - lo) / (hi - lo)));
    }
    for (int x = 0; x <= size; ++x) img.fill(ox + x, oy + size + 12, ox + x, oy + size + 22, colormap(double(x) / size));
    img.text(ox, oy + size + 28, tick(lo), kBlack);
    const std::string h = tick(hi);
    img.text(ox + size - Image::text_width(h), oy + size + 28, h, kBlack);
  }
  img.write_png(path);
}

}  // namespace geopre::cli
