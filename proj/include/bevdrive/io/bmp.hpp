#pragma once

#include <cstdint>
#include <fstream>
#include <vector>

namespace bevdrive::io {

/// Minimal 24-bit RGB canvas with a deterministic BMP writer.
class Canvas {
 public:
  Canvas(int w, int h, std::uint8_t r = 16, std::uint8_t g = 16, std::uint8_t b = 20)
      : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3) {
    for (int i = 0; i < w * h; ++i) {
      px_[3 * i] = b;
      px_[3 * i + 1] = g;
      px_[3 * i + 2] = r;
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    const std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
    px_[i] = b;
    px_[i + 1] = g;
    px_[i + 2] = r;
  }

  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g,
            std::uint8_t b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
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

  void save(const std::string& path) const {
    const int row_bytes = ((w_ * 3 + 3) / 4) * 4;
    const std::uint32_t image_size = static_cast<std::uint32_t>(row_bytes) * h_;
    const std::uint32_t file_size = 54 + image_size;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("bmp: cannot open " + path);
    auto w16 = [&](std::uint16_t v) { f.write(reinterpret_cast<char*>(&v), 2); };
    auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); };
    f.put('B');
    f.put('M');
    w32(file_size);
    w32(0);
    w32(54);
    w32(40);
    w32(static_cast<std::uint32_t>(w_));
    w32(static_cast<std::uint32_t>(h_));
    w16(1);
    w16(24);
    w32(0);
    w32(image_size);
    w32(2835);
    w32(2835);
    w32(0);
    w32(0);
    std::vector<char> row(row_bytes, 0);
    for (int y = h_ - 1; y >= 0; --y) {  // bottom-up
      std::memcpy(row.data(), px_.data() + static_cast<std::size_t>(y) * w_ * 3,
                  static_cast<std::size_t>(w_) * 3);
      f.write(row.data(), row_bytes);
    }
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;  // BGR
};

}  // namespace bevdrive::io
