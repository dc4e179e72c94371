#include "core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attrivae {

namespace {

// Viridis at t = 0, 0.1, ..., 1.
constexpr std::array<std::array<float, 3>, 11> kViridis{{
    {0.267004f, 0.004874f, 0.329415f}, {0.282623f, 0.140926f, 0.457517f}, {0.253935f, 0.265254f, 0.529983f},
    {0.206756f, 0.371758f, 0.553117f}, {0.163625f, 0.471133f, 0.558148f}, {0.127568f, 0.566949f, 0.550556f},
    {0.134692f, 0.658636f, 0.517649f}, {0.266941f, 0.748751f, 0.440573f}, {0.477504f, 0.821444f, 0.318195f},
    {0.741388f, 0.873449f, 0.149561f}, {0.993248f, 0.906157f, 0.143936f},
}};

}  // namespace

RgbImage::RgbImage(int w, int h, std::array<float, 3> fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  data.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) std::copy(fill.begin(), fill.end(), data.begin() + static_cast<long>(i));
}

std::array<float, 3> viridis(double t) {
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 10.0;
  const int i = std::min(9, static_cast<int>(pos));
  const double f = pos - i;
  std::array<float, 3> c{};
  for (int k = 0; k < 3; ++k)
    c[static_cast<std::size_t>(k)] = static_cast<float>(
        (1.0 - f) * kViridis[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
        f * kViridis[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(k)]);
  return c;
}

RgbImage gray_slice(std::span<const float> volume, nn::Extent3 shape, int z) {
  if (volume.size() != shape.count()) throw std::invalid_argument("gray_slice: volume size differs from shape");
  if (z < 0 || z >= shape.z) throw std::invalid_argument("gray_slice: slice index out of range");
  RgbImage img(shape.y, shape.x);
  for (int x = 0; x < shape.x; ++x)
    for (int y = 0; y < shape.y; ++y) {
      const float v = std::clamp(volume[(static_cast<std::size_t>(x) * shape.y + y) * shape.z + z], 0.f, 1.f);
      float* p = img.at(x, y);
      p[0] = p[1] = p[2] = v;
    }
  return img;
}

RgbImage colormap_slice(std::span<const float> volume, nn::Extent3 shape, int z) {
  if (volume.size() != shape.count()) throw std::invalid_argument("colormap_slice: volume size differs from shape");
  if (z < 0 || z >= shape.z) throw std::invalid_argument("colormap_slice: slice index out of range");
  RgbImage img(shape.y, shape.x);
  for (int x = 0; x < shape.x; ++x)
    for (int y = 0; y < shape.y; ++y) {
      const auto c = viridis(volume[(static_cast<std::size_t>(x) * shape.y + y) * shape.z + z]);
      std::copy(c.begin(), c.end(), img.at(x, y));
    }
  return img;
}

RgbImage montage(const std::vector<RgbImage>& tiles, int columns, int pad) {
  if (tiles.empty()) throw std::invalid_argument("montage: no tiles");
  if (columns <= 0) throw std::invalid_argument("montage: columns must be positive");
  const int tw = tiles.front().width, th = tiles.front().height;
  for (const auto& t : tiles)
    if (t.width != tw || t.height != th) throw std::invalid_argument("montage: tiles differ in size");
  const int n = static_cast<int>(tiles.size());
  const int cols = std::min(columns, n);
  const int rows = (n + columns - 1) / columns;
  RgbImage out(cols * tw + (cols + 1) * pad, rows * th + (rows + 1) * pad, {1.f, 1.f, 1.f});
  for (int i = 0; i < n; ++i) {
    const int r0 = pad + (i / columns) * (th + pad);
    const int c0 = pad + (i % columns) * (tw + pad);
    for (int r = 0; r < th; ++r) std::copy_n(tiles[static_cast<std::size_t>(i)].at(r, 0), 3 * tw, out.at(r0 + r, c0));
  }
  return out;
}

RgbImage scatter_plot(std::span<const double> xs, std::span<const double> ys,
                      const std::vector<std::array<float, 3>>& colors, int width, int height) {
  if (xs.size() != ys.size() || colors.size() != xs.size())
    throw std::invalid_argument("scatter_plot: coordinate and color counts differ");
  RgbImage img(width, height, {1.f, 1.f, 1.f});
  const int margin = 12;
  for (int c = margin; c < width - margin; ++c) {
    std::fill_n(img.at(margin, c), 3, 0.f);
    std::fill_n(img.at(height - margin - 1, c), 3, 0.f);
  }
  for (int r = margin; r < height - margin; ++r) {
    std::fill_n(img.at(r, margin), 3, 0.f);
    std::fill_n(img.at(r, width - margin - 1), 3, 0.f);
  }
  if (xs.empty()) return img;
  auto [xlo, xhi] = std::minmax_element(xs.begin(), xs.end());
  auto [ylo, yhi] = std::minmax_element(ys.begin(), ys.end());
  const double xspan = *xhi > *xlo ? *xhi - *xlo : 1.0;
  const double yspan = *yhi > *ylo ? *yhi - *ylo : 1.0;
  const int inner_w = width - 2 * margin - 8, inner_h = height - 2 * margin - 8;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int cx = margin + 4 + static_cast<int>(std::lround((xs[i] - *xlo) / xspan * (inner_w - 1)));
    const int cy = height - margin - 5 - static_cast<int>(std::lround((ys[i] - *ylo) / yspan * (inner_h - 1)));
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) std::copy(colors[i].begin(), colors[i].end(), img.at(cy + dr, cx + dc));
  }
  return img;
}

std::vector<std::uint8_t> to_rgb8(const RgbImage& image) {
  std::vector<std::uint8_t> out(image.data.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.f, 1.f) * 255.f));
  return out;
}

void write_png(const RgbImage& image, const std::filesystem::path& file) {
  const auto bytes = to_rgb8(image);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, file.string().c_str(), 0, bytes.data(), 0, nullptr))
    throw std::runtime_error("cannot write " + file.string() + ": " + png.message);
}

}  // namespace attrivae
