#include "core/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace attrivae {

namespace {

// Source coordinate of destination index i for half-pixel alignment.
void linear_taps(int i, int from, int to, int& i0, int& i1, double& f) {
  if (from == 1) {
    i0 = i1 = 0;
    f = 0.0;
    return;
  }
  const double src = std::max(0.0, (i + 0.5) * static_cast<double>(from) / to - 0.5);
  i0 = std::min(from - 1, static_cast<int>(std::floor(src)));
  i1 = std::min(from - 1, i0 + 1);
  f = src - i0;
}

}  // namespace

std::vector<double> upsample_linear(std::span<const double> values, nn::Extent3 from, nn::Extent3 to) {
  if (values.size() != from.count()) throw std::invalid_argument("upsample_linear: size differs from extent");
  // Separable: interpolate along z, then y, then x.
  auto pass = [](const std::vector<double>& in, nn::Extent3 a, int axis, int target) {
    nn::Extent3 b = a;
    (axis == 0 ? b.x : axis == 1 ? b.y : b.z) = target;
    std::vector<double> out(b.count());
    for (int x = 0; x < b.x; ++x)
      for (int y = 0; y < b.y; ++y)
        for (int z = 0; z < b.z; ++z) {
          int c[3] = {x, y, z};
          int i0, i1;
          double f;
          linear_taps(c[axis], a[axis], target, i0, i1, f);
          int p0[3] = {x, y, z}, p1[3] = {x, y, z};
          p0[axis] = i0;
          p1[axis] = i1;
          auto idx = [&](const int* p) { return (static_cast<std::size_t>(p[0]) * a.y + p[1]) * a.z + p[2]; };
          out[(static_cast<std::size_t>(x) * b.y + y) * b.z + z] = (1.0 - f) * in[idx(p0)] + f * in[idx(p1)];
        }
    return std::pair{out, b};
  };
  std::vector<double> cur(values.begin(), values.end());
  nn::Extent3 e = from;
  std::tie(cur, e) = pass(cur, e, 2, to.z);
  std::tie(cur, e) = pass(cur, e, 1, to.y);
  std::tie(cur, e) = pass(cur, e, 0, to.x);
  return cur;
}

template <typename T>
AttentionMap attention_map(const Model<T>& model, std::span<const float> x, int dim, const std::string& attribute_name,
                           const std::vector<double>* noise, AttentionDetail<T>* detail) {
  const int D = model.latent_dim();
  if (dim < 0 || dim >= D)
    throw std::invalid_argument("attention_map: dimension " + std::to_string(dim) + " out of range [0, " +
                                std::to_string(D) + ")");
  if (noise && static_cast<int>(noise->size()) != D)
    throw std::invalid_argument("attention_map: noise must have length " + std::to_string(D));
  const nn::Extent3 shape = model.config().image_shape;
  if (x.size() != shape.count())
    throw std::invalid_argument("attention_map: expected a volume of shape " + nn::to_string(shape));

  std::vector<float> v(x.begin(), x.end());
  const auto batch = make_batch<T>({&v}, shape);
  const auto F = model.encode_features(batch);
  typename Model<T>::TailCache cache;
  const auto lat = model.features_to_latent(F, &cache);

  nn::Matrix<T> gmu = nn::Matrix<T>::Zero(D, 1);
  gmu(dim, 0) = T(1);
  nn::Matrix<T> glv;
  if (noise) {
    glv = nn::Matrix<T>::Zero(D, 1);
    glv(dim, 0) = static_cast<T>((*noise)[static_cast<std::size_t>(dim)] * 0.5 *
                                 std::exp(0.5 * static_cast<double>(lat.logvar(dim, 0))));
  }
  const auto G = model.features_gradient(cache, gmu, noise ? &glv : nullptr);

  const int C = F.channels;
  const std::size_t V = F.voxels();
  std::vector<double> w(static_cast<std::size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    const T* g = G.plane(c, 0);
    for (std::size_t i = 0; i < V; ++i) s += static_cast<double>(g[i]);
    w[static_cast<std::size_t>(c)] = s / static_cast<double>(V);
  }
  std::vector<double> coarse(V, 0.0);
  for (int c = 0; c < C; ++c) {
    const T* f = F.plane(c, 0);
    for (std::size_t i = 0; i < V; ++i) coarse[i] += w[static_cast<std::size_t>(c)] * static_cast<double>(f[i]);
  }
  for (auto& h : coarse) h = std::max(0.0, h);

  const auto fine = upsample_linear(coarse, F.extent, shape);
  const double peak = *std::max_element(fine.begin(), fine.end());
  AttentionMap out;
  out.shape = shape;
  out.dimension_index = dim;
  out.attribute_name = attribute_name;
  out.heat.resize(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i)
    out.heat[i] = peak > 0.0 ? static_cast<float>(std::clamp(fine[i] / peak, 0.0, 1.0)) : 0.f;

  if (detail) {
    detail->features = F;
    detail->gradient = G;
    detail->weights = w;
    detail->coarse = coarse;
  }
  return out;
}

std::vector<RgbImage> overlay(const AttentionMap& map, std::span<const float> x, double alpha) {
  if (x.size() != map.shape.count() || map.heat.size() != map.shape.count())
    throw std::invalid_argument("overlay: heat map and volume shapes differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("overlay: alpha must lie in [0, 1]");
  std::vector<RgbImage> slices;
  const float a = static_cast<float>(alpha);
  for (int z = 0; z < map.shape.z; ++z) {
    RgbImage gray = gray_slice(x, map.shape, z);
    const RgbImage heat = colormap_slice(map.heat, map.shape, z);
    for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = (1.f - a) * gray.data[i] + a * heat.data[i];
    slices.push_back(std::move(gray));
  }
  return slices;
}

template AttentionMap attention_map<float>(const Model<float>&, std::span<const float>, int, const std::string&,
                                           const std::vector<double>*, AttentionDetail<float>*);
template AttentionMap attention_map<double>(const Model<double>&, std::span<const float>, int, const std::string&,
                                            const std::vector<double>*, AttentionDetail<double>*);

}  // namespace attrivae
