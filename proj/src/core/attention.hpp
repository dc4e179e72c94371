#pragma once

// Gradient-weighted attention maps of a latent coordinate over the encoder's
// last convolutional feature maps.

#include <span>
#include <string>
#include <vector>

#include "core/image_io.hpp"
#include "core/model.hpp"

namespace attrivae {

struct AttentionMap {
  std::vector<float> heat;  // input resolution, C-order, in [0,1]
  nn::Extent3 shape;
  int dimension_index = 0;
  std::string attribute_name;
};

template <typename T>
struct AttentionDetail {
  nn::FeatureMap<T> features;     // last-conv activations F_i (one sample)
  nn::FeatureMap<T> gradient;     // d z_dim / d F_i
  std::vector<double> weights;    // w_i: spatial mean of the gradient of map i
  std::vector<double> coarse;     // ReLU(sum_i w_i F_i) at feature resolution
};

// z = mu by default; with `noise` (length D) the gradient is taken through
// z = mu + noise * exp(logvar / 2). The model is used in evaluation mode.
template <typename T>
AttentionMap attention_map(const Model<T>& model, std::span<const float> x, int dim,
                           const std::string& attribute_name = {}, const std::vector<double>* noise = nullptr,
                           AttentionDetail<T>* detail = nullptr);

// Half-pixel-centered linear interpolation along every axis (bilinear for
// 2D, trilinear for 3D); singleton axes are broadcast.
std::vector<double> upsample_linear(std::span<const double> values, nn::Extent3 from, nn::Extent3 to);

// Per-slice blend (1 - alpha) * gray(x) + alpha * viridis(heat).
std::vector<RgbImage> overlay(const AttentionMap& map, std::span<const float> x, double alpha);

}  // namespace attrivae
