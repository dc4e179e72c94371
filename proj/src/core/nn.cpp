#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attrivae::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;

template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;

}  // namespace

std::string to_string(const Extent3& e) {
  return "(" + std::to_string(e.x) + "," + std::to_string(e.y) + "," + std::to_string(e.z) + ")";
}

template <typename T>
void Param<T>::initialize(Rng& rng) {
  switch (init) {
    case Init::zeros:
      std::fill(value.begin(), value.end(), T(0));
      break;
    case Init::ones:
      std::fill(value.begin(), value.end(), T(1));
      break;
    case Init::xavier_uniform: {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& w : value) w = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
  }
  zero_grad();
}

template <typename T>
Matrix<T> flatten(const FeatureMap<T>& fm) {
  const auto vox = fm.voxels();
  Matrix<T> m(static_cast<Eigen::Index>(fm.channels * vox), fm.batch);
  for (int n = 0; n < fm.batch; ++n) {
    T* col = m.col(n).data();
    for (int c = 0; c < fm.channels; ++c) std::copy_n(fm.plane(c, n), vox, col + c * vox);
  }
  return m;
}

template <typename T>
FeatureMap<T> unflatten(const Matrix<T>& m, int channels, Extent3 extent) {
  FeatureMap<T> fm(channels, static_cast<int>(m.cols()), extent);
  const auto vox = fm.voxels();
  if (static_cast<std::size_t>(m.rows()) != channels * vox)
    throw std::invalid_argument("unflatten: feature count mismatch");
  for (int n = 0; n < fm.batch; ++n) {
    const T* col = m.col(n).data();
    for (int c = 0; c < channels; ++c) std::copy_n(col + c * vox, vox, fm.plane(c, n));
  }
  return fm;
}

// ---------------------------------------------------------------- Conv

template <typename T>
Conv<T>::Conv(const std::string& name, int in_channels, int out_channels, Extent3 in_extent, int stride)
    : cin_(in_channels), cout_(out_channels), in_(in_extent) {
  auto axis = [&](int size, int& k, int& s, int& p, int& o) {
    k = size > 1 ? 3 : 1;
    s = size > 1 ? stride : 1;
    p = k / 2;
    o = (size + 2 * p - k) / s + 1;
  };
  axis(in_.x, kernel_.x, stride_.x, pad_.x, out_.x);
  axis(in_.y, kernel_.y, stride_.y, pad_.y, out_.y);
  axis(in_.z, kernel_.z, stride_.z, pad_.z, out_.z);
  const int kvol = static_cast<int>(kernel_.count());
  weight_ = Param<T>(name + ".weight", static_cast<std::size_t>(cout_) * cin_ * kvol, Init::xavier_uniform,
                     cin_ * kvol, cout_ * kvol);
  bias_ = Param<T>(name + ".bias", static_cast<std::size_t>(cout_), Init::zeros);
}

namespace {

// Valid output range [lo, hi) along one axis for kernel offset k.
inline void valid_range(int out, int in, int stride, int pad, int k, int& lo, int& hi) {
  // i = o * stride - pad + k must lie in [0, in)
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

}  // namespace

template <typename T>
void Conv<T>::im2col(const FeatureMap<T>& in, int n, std::vector<T>& cols) const {
  const std::size_t out_vox = out_.count();
  cols.assign(patch_size() * out_vox, T(0));
  std::size_t row = 0;
  for (int c = 0; c < cin_; ++c) {
    const T* src = in.plane(c, n);
    for (int kx = 0; kx < kernel_.x; ++kx)
      for (int ky = 0; ky < kernel_.y; ++ky)
        for (int kz = 0; kz < kernel_.z; ++kz, ++row) {
          int x0, x1, y0, y1, z0, z1;
          valid_range(out_.x, in_.x, stride_.x, pad_.x, kx, x0, x1);
          valid_range(out_.y, in_.y, stride_.y, pad_.y, ky, y0, y1);
          valid_range(out_.z, in_.z, stride_.z, pad_.z, kz, z0, z1);
          if (z0 >= z1) continue;
          T* dst = cols.data() + row * out_vox;
          for (int ox = x0; ox < x1; ++ox) {
            const int ix = ox * stride_.x - pad_.x + kx;
            if (out_.z == 1) {
              // 2D fast path: one strided gather along y.
              const T* src_line = src + static_cast<std::size_t>(ix) * in_.y - pad_.y + ky - pad_.z + kz;
              T* dst_line = dst + static_cast<std::size_t>(ox) * out_.y;
              const int sy = stride_.y;
              for (int oy = y0; oy < y1; ++oy) dst_line[oy] = src_line[oy * sy];
              continue;
            }
            for (int oy = y0; oy < y1; ++oy) {
              const int iy = oy * stride_.y - pad_.y + ky;
              const T* src_line = src + (static_cast<std::size_t>(ix) * in_.y + iy) * in_.z - pad_.z + kz;
              T* dst_line = dst + (static_cast<std::size_t>(ox) * out_.y + oy) * out_.z;
              for (int oz = z0; oz < z1; ++oz) dst_line[oz] = src_line[oz * stride_.z];
            }
          }
        }
  }
}

template <typename T>
void Conv<T>::col2im(const std::vector<T>& dcols, int n, FeatureMap<T>& grad) const {
  const std::size_t out_vox = out_.count();
  std::size_t row = 0;
  for (int c = 0; c < cin_; ++c) {
    T* dst = grad.plane(c, n);
    for (int kx = 0; kx < kernel_.x; ++kx)
      for (int ky = 0; ky < kernel_.y; ++ky)
        for (int kz = 0; kz < kernel_.z; ++kz, ++row) {
          int x0, x1, y0, y1, z0, z1;
          valid_range(out_.x, in_.x, stride_.x, pad_.x, kx, x0, x1);
          valid_range(out_.y, in_.y, stride_.y, pad_.y, ky, y0, y1);
          valid_range(out_.z, in_.z, stride_.z, pad_.z, kz, z0, z1);
          if (z0 >= z1) continue;
          const T* src = dcols.data() + row * out_vox;
          for (int ox = x0; ox < x1; ++ox) {
            const int ix = ox * stride_.x - pad_.x + kx;
            if (out_.z == 1) {
              T* dst_line = dst + static_cast<std::size_t>(ix) * in_.y - pad_.y + ky - pad_.z + kz;
              const T* src_line = src + static_cast<std::size_t>(ox) * out_.y;
              const int sy = stride_.y;
              for (int oy = y0; oy < y1; ++oy) dst_line[oy * sy] += src_line[oy];
              continue;
            }
            for (int oy = y0; oy < y1; ++oy) {
              const int iy = oy * stride_.y - pad_.y + ky;
              T* dst_line = dst + (static_cast<std::size_t>(ix) * in_.y + iy) * in_.z - pad_.z + kz;
              const T* src_line = src + (static_cast<std::size_t>(ox) * out_.y + oy) * out_.z;
              for (int oz = z0; oz < z1; ++oz) dst_line[oz * stride_.z] += src_line[oz];
            }
          }
        }
  }
}

namespace {

template <typename T>
using StridedRowMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedRowMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

}  // namespace

// Direct (tap-by-tap) convolution for stride-1 layers with few output
// channels, where building the patch matrix costs more than the product.
template <typename T>
template <typename Fn>
void Conv<T>::for_each_tap_row(Fn&& fn) const {
  int tap = 0;
  for (int kx = 0; kx < kernel_.x; ++kx)
    for (int ky = 0; ky < kernel_.y; ++ky)
      for (int kz = 0; kz < kernel_.z; ++kz, ++tap) {
        int x0, x1, y0, y1, z0, z1;
        valid_range(out_.x, in_.x, 1, pad_.x, kx, x0, x1);
        valid_range(out_.y, in_.y, 1, pad_.y, ky, y0, y1);
        valid_range(out_.z, in_.z, 1, pad_.z, kz, z0, z1);
        if (z0 >= z1 || y0 >= y1) continue;
        for (int ox = x0; ox < x1; ++ox) {
          const int ix = ox - pad_.x + kx;
          if (out_.z == 1) {
            // Whole y-run is contiguous in both input and output.
            fn(tap, static_cast<std::size_t>(ox) * out_.y + y0,
               static_cast<std::size_t>(ix) * in_.y + (y0 - pad_.y + ky), static_cast<std::size_t>(y1 - y0));
            continue;
          }
          for (int oy = y0; oy < y1; ++oy) {
            const int iy = oy - pad_.y + ky;
            fn(tap, (static_cast<std::size_t>(ox) * out_.y + oy) * out_.z + z0,
               (static_cast<std::size_t>(ix) * in_.y + iy) * in_.z + (z0 - pad_.z + kz),
               static_cast<std::size_t>(z1 - z0));
          }
        }
      }
}

template <typename T>
bool Conv<T>::use_direct() const {
  return stride_.x == 1 && stride_.y == 1 && stride_.z == 1 && cout_ <= 4;
}

template <typename T>
void Conv<T>::forward_direct(const FeatureMap<T>& in, FeatureMap<T>& out) const {
  const std::size_t kvol = kernel_.count();
  for (int o = 0; o < cout_; ++o)
    for (int c = 0; c < cin_; ++c) {
      const T* w = weight_.value.data() + (static_cast<std::size_t>(o) * cin_ + c) * kvol;
      for (int n = 0; n < in.batch; ++n) {
        const T* x = in.plane(c, n);
        T* y = out.plane(o, n);
        for_each_tap_row([&](int tap, std::size_t out_at, std::size_t in_at, std::size_t len) {
          const T wk = w[tap];
          T* yr = y + out_at;
          const T* xr = x + in_at;
          for (std::size_t i = 0; i < len; ++i) yr[i] += wk * xr[i];
        });
      }
    }
}

template <typename T>
void Conv<T>::backward_direct(const FeatureMap<T>& in, const FeatureMap<T>& grad_out, bool accumulate,
                              FeatureMap<T>* grad_in) {
  const std::size_t kvol = kernel_.count();
  std::vector<double> dw(kvol);
  for (int o = 0; o < cout_; ++o)
    for (int c = 0; c < cin_; ++c) {
      const std::size_t base = (static_cast<std::size_t>(o) * cin_ + c) * kvol;
      const T* w = weight_.value.data() + base;
      std::fill(dw.begin(), dw.end(), 0.0);
      for (int n = 0; n < in.batch; ++n) {
        const T* x = in.plane(c, n);
        const T* dy = grad_out.plane(o, n);
        T* dx = grad_in ? grad_in->plane(c, n) : nullptr;
        for_each_tap_row([&](int tap, std::size_t out_at, std::size_t in_at, std::size_t len) {
          const T* dyr = dy + out_at;
          if (accumulate) {
            using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
            const auto l = static_cast<Eigen::Index>(len);
            dw[static_cast<std::size_t>(tap)] += Eigen::Map<const Vec>(dyr, l).dot(Eigen::Map<const Vec>(x + in_at, l));
          }
          if (dx) {
            const T wk = w[tap];
            T* dxr = dx + in_at;
            for (std::size_t i = 0; i < len; ++i) dxr[i] += wk * dyr[i];
          }
        });
      }
      if (accumulate)
        for (std::size_t t = 0; t < kvol; ++t) weight_.grad[base + t] += static_cast<T>(dw[t]);
    }
}

template <typename T>
FeatureMap<T> Conv<T>::forward(const FeatureMap<T>& in, Cache* cache) const {
  if (in.channels != cin_ || !(in.extent == in_))
    throw std::invalid_argument("conv: expected input " + std::to_string(cin_) + "x" + to_string(in_) +
                                ", got " + std::to_string(in.channels) + "x" + to_string(in.extent));
  if (cache) cache->input = in;
  FeatureMap<T> out(cout_, in.batch, out_);
  const auto k = static_cast<Eigen::Index>(patch_size());
  const auto vox = static_cast<Eigen::Index>(out_.count());
  const auto row_stride = static_cast<Eigen::Index>(out.plane_size());
  ConstRowMap<T> w(weight_.value.data(), cout_, k);
  std::vector<T> cols;
  if (use_direct()) forward_direct(in, out);
  for (int n = 0; n < in.batch && !use_direct(); ++n) {
    im2col(in, n, cols);
    ConstRowMap<T> cm(cols.data(), k, vox);
    StridedRowMap<T> y(out.plane(0, n), cout_, vox, Eigen::OuterStride<>(row_stride));
    y.noalias() = w * cm;
  }
  for (int o = 0; o < cout_; ++o) {
    T* row = out.channel(o);
    const T b = bias_.value[static_cast<std::size_t>(o)];
    for (std::size_t i = 0; i < out.plane_size(); ++i) row[i] += b;
  }
  return out;
}

template <typename T>
FeatureMap<T> Conv<T>::backward_impl(const Cache& cache, const FeatureMap<T>& grad_out, bool accumulate,
                                     bool need_input_grad) {
  const auto& in = cache.input;
  const auto k = static_cast<Eigen::Index>(patch_size());
  const auto vox = static_cast<Eigen::Index>(out_.count());
  const auto row_stride = static_cast<Eigen::Index>(grad_out.plane_size());
  ConstRowMap<T> w(weight_.value.data(), cout_, k);
  RowMap<T> dw(weight_.grad.data(), cout_, k);
  FeatureMap<T> grad_in;
  if (need_input_grad) grad_in = FeatureMap<T>(cin_, in.batch, in_);
  if (use_direct()) {
    backward_direct(in, grad_out, accumulate, need_input_grad ? &grad_in : nullptr);
  }
  std::vector<T> cols, dcols(use_direct() ? 0 : static_cast<std::size_t>(k * vox));
  for (int n = 0; n < in.batch && !use_direct(); ++n) {
    ConstStridedRowMap<T> dy(grad_out.plane(0, n), cout_, vox, Eigen::OuterStride<>(row_stride));
    if (accumulate) {
      im2col(in, n, cols);
      ConstRowMap<T> cm(cols.data(), k, vox);
      dw.noalias() += dy * cm.transpose();
    }
    if (need_input_grad) {
      RowMap<T> dc(dcols.data(), k, vox);
      dc.noalias() = w.transpose() * dy;
      col2im(dcols, n, grad_in);
    }
  }
  if (accumulate) {
    for (int o = 0; o < cout_; ++o) {
      const T* row = grad_out.channel(o);
      double sum = 0.0;
      for (std::size_t i = 0; i < grad_out.plane_size(); ++i) sum += row[i];
      bias_.grad[static_cast<std::size_t>(o)] += static_cast<T>(sum);
    }
  }
  return grad_in;
}

template <typename T>
FeatureMap<T> Conv<T>::backward(const Cache& cache, const FeatureMap<T>& grad_out, bool need_input_grad) {
  return backward_impl(cache, grad_out, true, need_input_grad);
}

template <typename T>
FeatureMap<T> Conv<T>::backward_input(const Cache& cache, const FeatureMap<T>& grad_out) const {
  return const_cast<Conv<T>*>(this)->backward_impl(cache, grad_out, false, true);
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, int channels)
    : channels_(channels),
      gamma_(name + ".gamma", static_cast<std::size_t>(channels), Init::ones),
      beta_(name + ".beta", static_cast<std::size_t>(channels), Init::zeros),
      running_mean_(static_cast<std::size_t>(channels), T(0)),
      running_var_(static_cast<std::size_t>(channels), T(1)) {}

template <typename T>
FeatureMap<T> BatchNorm<T>::forward(const FeatureMap<T>& in, Mode mode, Cache* cache) {
  if (mode == Mode::eval) return forward_eval(in, cache);
  FeatureMap<T> out(in.channels, in.batch, in.extent);
  const std::size_t plane = in.plane_size();
  if (cache) {
    cache->mode = Mode::train;
    cache->normalized.resize(in.data.size());
    cache->inv_std.resize(static_cast<std::size_t>(channels_));
  }
  for (int c = 0; c < channels_; ++c) {
    const T* x = in.channel(c);
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += x[i];
    const double mean = sum / static_cast<double>(plane);
    double sq = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sq += (x[i] - mean) * (x[i] - mean);
    const double var = sq / static_cast<double>(plane);
    const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
    const auto ci = static_cast<std::size_t>(c);
    const T g = gamma_.value[ci], b = beta_.value[ci];
    T* y = out.channel(c);
    T* xhat = cache ? cache->normalized.data() + ci * plane : nullptr;
    for (std::size_t i = 0; i < plane; ++i) {
      const T h = static_cast<T>((x[i] - mean) * inv_std);
      if (xhat) xhat[i] = h;
      y[i] = g * h + b;
    }
    if (cache) cache->inv_std[ci] = static_cast<T>(inv_std);
    const double unbiased = plane > 1 ? var * static_cast<double>(plane) / static_cast<double>(plane - 1) : var;
    running_mean_[ci] = static_cast<T>((1.0 - kMomentum) * running_mean_[ci] + kMomentum * mean);
    running_var_[ci] = static_cast<T>((1.0 - kMomentum) * running_var_[ci] + kMomentum * unbiased);
  }
  return out;
}

template <typename T>
FeatureMap<T> BatchNorm<T>::forward_eval(const FeatureMap<T>& in, Cache* cache) const {
  FeatureMap<T> out(in.channels, in.batch, in.extent);
  const std::size_t plane = in.plane_size();
  if (cache) {
    cache->mode = Mode::eval;
    cache->normalized.clear();
    cache->inv_std.resize(static_cast<std::size_t>(channels_));
  }
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[ci]) + kEpsilon));
    const T scale = gamma_.value[ci] * inv_std;
    const T shift = beta_.value[ci] - running_mean_[ci] * scale;
    const T* x = in.channel(c);
    T* y = out.channel(c);
    for (std::size_t i = 0; i < plane; ++i) y[i] = x[i] * scale + shift;
    if (cache) cache->inv_std[ci] = inv_std;
  }
  return out;
}

template <typename T>
FeatureMap<T> BatchNorm<T>::backward_impl(const Cache& cache, const FeatureMap<T>& grad_out, bool accumulate) {
  FeatureMap<T> grad(grad_out.channels, grad_out.batch, grad_out.extent);
  const std::size_t plane = grad_out.plane_size();
  const double n = static_cast<double>(plane);
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const T* dy = grad_out.channel(c);
    T* dx = grad.channel(c);
    const double g = gamma_.value[ci];
    const double inv_std = cache.inv_std[ci];
    if (cache.mode == Mode::eval) {
      for (std::size_t i = 0; i < plane; ++i) dx[i] = static_cast<T>(dy[i] * g * inv_std);
      continue;
    }
    const T* xhat = cache.normalized.data() + ci * plane;
    double dgamma = 0.0, dbeta = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      dgamma += static_cast<double>(dy[i]) * xhat[i];
      dbeta += dy[i];
    }
    if (accumulate) {
      gamma_.grad[ci] += static_cast<T>(dgamma);
      beta_.grad[ci] += static_cast<T>(dbeta);
    }
    const double scale = g * inv_std / n;
    for (std::size_t i = 0; i < plane; ++i)
      dx[i] = static_cast<T>(scale * (n * dy[i] - dbeta - xhat[i] * dgamma));
  }
  return grad;
}

template <typename T>
FeatureMap<T> BatchNorm<T>::backward(const Cache& cache, const FeatureMap<T>& grad_out) {
  return backward_impl(cache, grad_out, true);
}

template <typename T>
FeatureMap<T> BatchNorm<T>::backward_input(const Cache& cache, const FeatureMap<T>& grad_out) const {
  return const_cast<BatchNorm<T>*>(this)->backward_impl(cache, grad_out, false);
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(const std::string& name, int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", static_cast<std::size_t>(in_features) * out_features, Init::xavier_uniform,
              in_features, out_features),
      bias_(name + ".bias", static_cast<std::size_t>(out_features), Init::zeros) {}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& in, Cache* cache) const {
  if (in.rows() != in_)
    throw std::invalid_argument("linear: expected " + std::to_string(in_) + " features, got " +
                                std::to_string(in.rows()));
  if (cache) cache->input = in;
  ConstRowMap<T> w(weight_.value.data(), out_, in_);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_);
  Matrix<T> y = w * in;
  y.colwise() += b;
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Cache& cache, const Matrix<T>& grad_out, bool need_input_grad) {
  RowMap<T> dw(weight_.grad.data(), out_, in_);
  dw.noalias() += grad_out * cache.input.transpose();
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_.grad.data(), out_);
  db += grad_out.rowwise().sum();
  if (!need_input_grad) return {};
  return backward_input(grad_out);
}

template <typename T>
Matrix<T> Linear<T>::backward_input(const Matrix<T>& grad_out) const {
  ConstRowMap<T> w(weight_.value.data(), out_, in_);
  return w.transpose() * grad_out;
}

// ---------------------------------------------------------------- elementwise

namespace {

// Flat source voxel of every target voxel for a nearest-neighbour resize.
std::vector<std::size_t> nearest_map(Extent3 source, Extent3 target) {
  auto axis = [](int i, int src, int dst) {
    return static_cast<std::size_t>((static_cast<long long>(i) * src) / dst);
  };
  std::vector<std::size_t> map(target.count());
  std::size_t v = 0;
  for (int x = 0; x < target.x; ++x)
    for (int y = 0; y < target.y; ++y)
      for (int z = 0; z < target.z; ++z, ++v)
        map[v] = (axis(x, source.x, target.x) * source.y + axis(y, source.y, target.y)) * source.z +
                 axis(z, source.z, target.z);
  return map;
}

}  // namespace

template <typename T>
FeatureMap<T> upsample_nearest(const FeatureMap<T>& in, Extent3 target) {
  FeatureMap<T> out(in.channels, in.batch, target);
  const auto map = nearest_map(in.extent, target);
  for (int c = 0; c < in.channels; ++c)
    for (int n = 0; n < in.batch; ++n) {
      const T* src = in.plane(c, n);
      T* dst = out.plane(c, n);
      for (std::size_t v = 0; v < map.size(); ++v) dst[v] = src[map[v]];
    }
  return out;
}

template <typename T>
FeatureMap<T> upsample_nearest_backward(const FeatureMap<T>& grad_out, Extent3 source) {
  FeatureMap<T> grad(grad_out.channels, grad_out.batch, source);
  const auto map = nearest_map(source, grad_out.extent);
  for (int c = 0; c < grad_out.channels; ++c)
    for (int n = 0; n < grad_out.batch; ++n) {
      const T* src = grad_out.plane(c, n);
      T* dst = grad.plane(c, n);
      for (std::size_t v = 0; v < map.size(); ++v) dst[map[v]] += src[v];
    }
  return grad;
}

template <typename T>
void relu_inplace(std::vector<T>& v) {
  for (auto& x : v) x = x > T(0) ? x : T(0);
}

template <typename T>
void relu_backward_inplace(std::vector<T>& grad, const std::vector<T>& output) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(output[i] > T(0))) grad[i] = T(0);
}

template <typename T>
void sigmoid_inplace(std::vector<T>& v) {
  for (auto& x : v) x = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

// ---------------------------------------------------------------- Adam

template <typename T>
void Adam::step(const std::vector<Param<T>*>& params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = s_.beta1 * m[j] + (1.0 - s_.beta1) * g;
      v[j] = s_.beta2 * v[j] + (1.0 - s_.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.value[j] = static_cast<T>(p.value[j] - s_.lr * mhat / (std::sqrt(vhat) + s_.epsilon));
    }
  }
}

#define ATTRIVAE_NN_INSTANTIATE(T)                                                           \
  template struct Param<T>;                                                                  \
  template class Conv<T>;                                                                    \
  template class BatchNorm<T>;                                                               \
  template class Linear<T>;                                                                  \
  template Matrix<T> flatten<T>(const FeatureMap<T>&);                                       \
  template FeatureMap<T> unflatten<T>(const Matrix<T>&, int, Extent3);                       \
  template FeatureMap<T> upsample_nearest<T>(const FeatureMap<T>&, Extent3);                 \
  template FeatureMap<T> upsample_nearest_backward<T>(const FeatureMap<T>&, Extent3);        \
  template void relu_inplace<T>(std::vector<T>&);                                            \
  template void relu_backward_inplace<T>(std::vector<T>&, const std::vector<T>&);            \
  template void sigmoid_inplace<T>(std::vector<T>&);                                         \
  template void Adam::step<T>(const std::vector<Param<T>*>&);

ATTRIVAE_NN_INSTANTIATE(float)
ATTRIVAE_NN_INSTANTIATE(double)

}  // namespace attrivae::nn
