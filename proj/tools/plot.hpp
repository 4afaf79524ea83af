#pragma once

// Verification panels as PNG: truth | forecast | threshold-mask difference,
// a CSI annotation, and the colour scale drawn in the bottom margin.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/metrics.hpp"

namespace nowcast::plot {

struct Rgb {
  std::uint8_t r, g, b;
};

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image(int w, int h, Rgb fill = {255, 255, 255}) : width(w), height(h), rgb(std::size_t(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
      rgb[i] = fill.r;
      rgb[i + 1] = fill.g;
      rgb[i + 2] = fill.b;
    }
  }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* p = &rgb[(std::size_t(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  Rgb get(int x, int y) const {
    const auto* p = &rgb[(std::size_t(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }

  void fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }

  void frame_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int x = x0; x < x0 + w; ++x) {
      set(x, y0, c);
      set(x, y0 + h - 1, c);
    }
    for (int y = y0; y < y0 + h; ++y) {
      set(x0, y, c);
      set(x0 + w - 1, y, c);
    }
  }
};

// ---------------------------------------------------------------------------
// PNG (8-bit RGB, no interlace, filter 0 on every row)

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const auto start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(img.height) * (std::size_t(img.width) * 3 + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const auto* row = &img.rgb[std::size_t(y) * img.width * 3];
    raw.insert(raw.end(), row, row + std::size_t(img.width) * 3);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw DataError("PNG compression failed");
  packed.resize(packed_size);

  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline void write_png(const Image& img, const fs::path& file) {
  const auto bytes = encode_png(img);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + file.string());
}

// ---------------------------------------------------------------------------
// 5x7 font, column-major, bit 0 at the top.

namespace detail {

inline const std::array<std::uint8_t, 5>* glyph(char ch) {
  struct G {
    char c;
    std::array<std::uint8_t, 5> cols;
  };
  static const G table[] = {
      {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
      {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
      {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
      {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
      {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
      {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
      {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
      {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
      {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
      {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
      {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
      {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
      {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
      {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
      {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
      {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
      {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
      {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
      {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}},
      {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
      {'@', {0x32, 0x49, 0x79, 0x41, 0x3E}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
      {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'<', {0x08, 0x14, 0x22, 0x41, 0x00}},
      {'>', {0x00, 0x41, 0x22, 0x14, 0x08}}, {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}},
      {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
  };
  if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
  for (const auto& g : table)
    if (g.c == ch) return &g.cols;
  return nullptr;  // blank
}

}  // namespace detail

inline constexpr int kGlyphAdvance = 6;

// Draws text with its top-left corner at (x, y); returns the pen position.
inline int draw_text(Image& img, int x, int y, std::string_view text, Rgb c, int scale = 1) {
  for (char ch : text) {
    if (const auto* cols = detail::glyph(ch))
      for (int cx = 0; cx < 5; ++cx)
        for (int cy = 0; cy < 7; ++cy)
          if ((*cols)[static_cast<std::size_t>(cx)] >> cy & 1) img.fill_rect(x + cx * scale, y + cy * scale, scale, scale, c);
    x += kGlyphAdvance * scale;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Colour scale

struct ColourBand {
  double lower;  // mm/h, inclusive
  Rgb colour;
  const char* label;
};

inline const std::vector<ColourBand>& rain_scale() {
  static const std::vector<ColourBand> bands{
      {0.0, {255, 255, 255}, "0"},   {0.5, {198, 225, 245}, "0.5"}, {1.0, {140, 190, 235}, "1"},
      {2.0, {70, 140, 220}, "2"},    {5.0, {40, 170, 90}, "5"},     {10.0, {150, 200, 40}, "10"},
      {20.0, {250, 210, 40}, "20"},  {30.0, {240, 120, 30}, "30"},  {50.0, {200, 30, 40}, "50"},
  };
  return bands;
}

inline Rgb rain_colour(float v) {
  if (is_missing(v)) return {180, 180, 180};
  Rgb c = rain_scale().front().colour;
  for (const auto& b : rain_scale())
    if (v >= b.lower) c = b.colour;
  return c;
}

inline constexpr Rgb kInk{20, 20, 20};
inline constexpr Rgb kMiss{40, 80, 220};         // truth above threshold, forecast below
inline constexpr Rgb kFalseAlarm{220, 40, 40};  // forecast above threshold, truth below
inline constexpr Rgb kMissingCell{180, 180, 180};

// ---------------------------------------------------------------------------
// Panels

inline std::string panel_file_name(int lead_minutes) {
  char name[32];
  std::snprintf(name, sizeof name, "panel_%+04dmin.png", lead_minutes);
  return name;
}

inline std::string csi_annotation(std::optional<double> v) {
  return "CSI " + (v ? format_cell(v) : std::string("N/A"));
}

inline Image render_panel(const RainField& truth, const RainField& forecast, int lead_minutes, double threshold,
                          int scale = 4) {
  if (truth.meta.height != forecast.meta.height || truth.meta.width != forecast.meta.width)
    throw DataError("truth and forecast grids differ");
  const int h = static_cast<int>(truth.meta.height) * scale, w = static_cast<int>(truth.meta.width) * scale;
  const auto score = csi(truth, forecast, threshold);
  char head[128];
  std::snprintf(head, sizeof head, "LEAD %+04d MIN  %s @ %g MM/H", lead_minutes, csi_annotation(score).c_str(),
                threshold);
  const int pad = 10, top = 48, gap = 10, legend = 78;
  const int text_width = static_cast<int>(std::string_view(head).size()) * kGlyphAdvance * 2;
  const int width = std::max({3 * w + 2 * gap + 2 * pad, text_width + 2 * pad, 300});
  Image img(width, top + h + legend, {255, 255, 255});
  draw_text(img, pad, 6, head, kInk, 2);

  const char* titles[] = {"TRUTH", "FORECAST", "MASK DIFF"};
  for (int p = 0; p < 3; ++p) {
    const int x0 = pad + p * (w + gap);
    draw_text(img, x0, top - 12, titles[p], kInk, 1);
    for (int r = 0; r < static_cast<int>(truth.meta.height); ++r)
      for (int c = 0; c < static_cast<int>(truth.meta.width); ++c) {
        const float tv = truth.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        const float fv = forecast.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        Rgb col;
        if (p == 0) {
          col = rain_colour(tv);
        } else if (p == 1) {
          col = rain_colour(fv);
        } else {
          const bool a = tv >= threshold, b = fv >= threshold;
          col = a == b ? Rgb{255, 255, 255} : (a ? kMiss : kFalseAlarm);
        }
        img.fill_rect(x0 + c * scale, top + r * scale, scale, scale, col);
      }
    img.frame_rect(x0 - 1, top - 1, w + 2, h + 2, kInk);
  }

  // Colour scale and difference key.
  int lx = pad;
  const int ly = top + h + 12;
  draw_text(img, lx, ly, "RAIN RATE MM/H", kInk, 1);
  for (const auto& b : rain_scale()) {
    img.fill_rect(lx, ly + 12, 24, 12, b.colour);
    img.frame_rect(lx, ly + 12, 24, 12, kInk);
    draw_text(img, lx, ly + 28, b.label, kInk, 1);
    lx += 28;
  }
  int kx = pad;
  const int ky = ly + 44;
  img.fill_rect(kx, ky, 12, 12, kMiss);
  kx = draw_text(img, kx + 16, ky + 3, "MISS", kInk, 1) + 10;
  img.fill_rect(kx, ky, 12, 12, kFalseAlarm);
  kx = draw_text(img, kx + 16, ky + 3, "FALSE ALARM", kInk, 1) + 10;
  img.fill_rect(kx, ky, 12, 12, kMissingCell);
  draw_text(img, kx + 16, ky + 3, "NO DATA", kInk, 1);
  return img;
}

}  // namespace nowcast::plot
