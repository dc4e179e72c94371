#pragma once

// RGB rasters for overlays, montages and scatter plots, written as 8-bit PNG.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "core/nn.hpp"

namespace attrivae {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major, 3 channels per pixel, in [0,1]

  RgbImage() = default;
  RgbImage(int w, int h, std::array<float, 3> fill = {0.f, 0.f, 0.f});
  float* at(int row, int col) { return data.data() + 3 * (static_cast<std::size_t>(row) * width + col); }
  const float* at(int row, int col) const { return data.data() + 3 * (static_cast<std::size_t>(row) * width + col); }
};

// Perceptually uniform colormap (viridis), t clamped to [0,1].
std::array<float, 3> viridis(double t);

// Slice z of a C-order (x, y, z) volume as grayscale; rows follow x,
// columns follow y.
RgbImage gray_slice(std::span<const float> volume, nn::Extent3 shape, int z);
RgbImage colormap_slice(std::span<const float> volume, nn::Extent3 shape, int z);

// Tiles laid out row-major with `columns` per row, separated by `pad` pixels.
RgbImage montage(const std::vector<RgbImage>& tiles, int columns, int pad = 2);

// Points in data coordinates mapped to a framed plot; colors per point.
RgbImage scatter_plot(std::span<const double> xs, std::span<const double> ys,
                      const std::vector<std::array<float, 3>>& colors, int width = 400, int height = 400);

std::vector<std::uint8_t> to_rgb8(const RgbImage& image);
void write_png(const RgbImage& image, const std::filesystem::path& file);

}  // namespace attrivae
