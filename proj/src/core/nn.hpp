#pragma once

// Minimal layer library for the encoder/decoder/classifier stacks.
//
// Convolutional activations use a channel-major layout [channel][sample][voxel]
// so that a whole batch is one GEMM and batch norm reduces over contiguous
// rows. Dense activations are Eigen matrices with one column per sample.
//
// Every layer has a const forward that optionally fills a cache, a backward
// that accumulates parameter gradients, and a const backward_input used by
// the attention maps on a frozen model.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "core/random.hpp"

namespace attrivae::nn {

// Spatial extent; 2D images are (X, Y, 1).
struct Extent3 {
  int x = 1, y = 1, z = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  int operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  bool operator==(const Extent3&) const = default;
};

std::string to_string(const Extent3& e);

enum class Mode { train, eval };

enum class Init { xavier_uniform, zeros, ones };

template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
  int fan_in = 0;
  int fan_out = 0;
  Init init = Init::zeros;

  Param() = default;
  Param(std::string n, std::size_t size, Init how, int fin = 0, int fout = 0)
      : name(std::move(n)), value(size, T(0)), grad(size, T(0)), fan_in(fin), fan_out(fout), init(how) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
  void initialize(Rng& rng);
};

template <typename T>
struct FeatureMap {
  int channels = 0;
  int batch = 0;
  Extent3 extent;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int n, Extent3 e)
      : channels(c), batch(n), extent(e), data(static_cast<std::size_t>(c) * n * e.count(), T(0)) {}

  std::size_t voxels() const { return extent.count(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(batch) * voxels(); }
  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane_size(); }
  const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane_size(); }
  T* plane(int c, int n) { return channel(c) + static_cast<std::size_t>(n) * voxels(); }
  const T* plane(int c, int n) const { return channel(c) + static_cast<std::size_t>(n) * voxels(); }
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// [channel][sample][voxel] -> features x samples, feature index = c * voxels + v.
template <typename T>
Matrix<T> flatten(const FeatureMap<T>& fm);
template <typename T>
FeatureMap<T> unflatten(const Matrix<T>& m, int channels, Extent3 extent);

// 3x3x3 convolution with padding 1; along singleton axes the kernel collapses
// to extent 1 so that (X, Y, 1) inputs behave exactly like 2D convolutions.
template <typename T>
class Conv {
 public:
  struct Cache {
    FeatureMap<T> input;
  };

  Conv() = default;
  Conv(const std::string& name, int in_channels, int out_channels, Extent3 in_extent, int stride);

  Extent3 in_extent() const { return in_; }
  Extent3 out_extent() const { return out_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }

  FeatureMap<T> forward(const FeatureMap<T>& in, Cache* cache) const;
  FeatureMap<T> backward(const Cache& cache, const FeatureMap<T>& grad_out, bool need_input_grad);
  FeatureMap<T> backward_input(const Cache& cache, const FeatureMap<T>& grad_out) const;

  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  Param<T>& bias() { return bias_; }
  void collect(std::vector<Param<T>*>& out) { out.push_back(&weight_); out.push_back(&bias_); }

 private:
  // Patch matrix (cin * kernel) x out_voxels of sample n.
  void im2col(const FeatureMap<T>& in, int n, std::vector<T>& cols) const;
  void col2im(const std::vector<T>& dcols, int n, FeatureMap<T>& grad) const;
  FeatureMap<T> backward_impl(const Cache& cache, const FeatureMap<T>& grad_out, bool accumulate,
                              bool need_input_grad);
  template <typename Fn>
  void for_each_tap_row(Fn&& fn) const;
  bool use_direct() const;
  void forward_direct(const FeatureMap<T>& in, FeatureMap<T>& out) const;
  void backward_direct(const FeatureMap<T>& in, const FeatureMap<T>& grad_out, bool accumulate,
                       FeatureMap<T>* grad_in);
  std::size_t patch_size() const { return static_cast<std::size_t>(cin_) * kernel_.count(); }

  int cin_ = 0, cout_ = 0;
  Extent3 in_, out_, kernel_, stride_, pad_;
  Param<T> weight_, bias_;
};

template <typename T>
class BatchNorm {
 public:
  struct Cache {
    std::vector<T> normalized;
    std::vector<T> inv_std;
    Mode mode = Mode::eval;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels);

  // Train mode normalizes with batch statistics and updates the running
  // estimates only when `update_running` is set.
  FeatureMap<T> forward(const FeatureMap<T>& in, Mode mode, Cache* cache);
  FeatureMap<T> forward_eval(const FeatureMap<T>& in, Cache* cache) const;
  FeatureMap<T> backward(const Cache& cache, const FeatureMap<T>& grad_out);
  FeatureMap<T> backward_input(const Cache& cache, const FeatureMap<T>& grad_out) const;

  void collect(std::vector<Param<T>*>& out) { out.push_back(&gamma_); out.push_back(&beta_); }
  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }
  const std::vector<T>& running_mean() const { return running_mean_; }
  const std::vector<T>& running_var() const { return running_var_; }

  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  FeatureMap<T> backward_impl(const Cache& cache, const FeatureMap<T>& grad_out, bool accumulate);

  int channels_ = 0;
  Param<T> gamma_, beta_;
  std::vector<T> running_mean_, running_var_;
};

template <typename T>
class Linear {
 public:
  struct Cache {
    Matrix<T> input;
  };

  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Matrix<T> forward(const Matrix<T>& in, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& grad_out, bool need_input_grad);
  Matrix<T> backward_input(const Matrix<T>& grad_out) const;

  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  Param<T>& bias() { return bias_; }
  void collect(std::vector<Param<T>*>& out) { out.push_back(&weight_); out.push_back(&bias_); }

 private:
  int in_ = 0, out_ = 0;
  Param<T> weight_, bias_;  // weight is out x in, row-major
};

// Nearest-neighbour resize to a larger extent (x2 along non-singleton axes).
template <typename T>
FeatureMap<T> upsample_nearest(const FeatureMap<T>& in, Extent3 target);
template <typename T>
FeatureMap<T> upsample_nearest_backward(const FeatureMap<T>& grad_out, Extent3 source);

template <typename T>
void relu_inplace(std::vector<T>& v);
// Zeroes grad where the forward output was not positive.
template <typename T>
void relu_backward_inplace(std::vector<T>& grad, const std::vector<T>& output);

template <typename T>
void sigmoid_inplace(std::vector<T>& v);

class Adam {
 public:
  struct Settings {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  explicit Adam(Settings s) : s_(s) {}

  template <typename T>
  void step(const std::vector<Param<T>*>& params);

  const Settings& settings() const { return s_; }

 private:
  Settings s_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace attrivae::nn
