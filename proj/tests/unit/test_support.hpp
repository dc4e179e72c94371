#pragma once

// Helpers shared by the unit tests: finite differences, small models and
// scratch directories.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace test_support {

template <typename M>
std::vector<double> to_vector(const M& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

// Central differences of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// max |a - b| / max(max |b|, tiny), a scale-aware relative error.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, scale = 1e-12;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

// A narrow network for fast tests; `size` is the square image side.
inline attrivae::ModelConfig tiny_config(int size = 16, int latent = 6) {
  attrivae::ModelConfig c;
  c.latent_dim = latent;
  c.embedding_dim = 12;
  c.conv_channels = {2, 3, 3, 4, 4};
  c.fc_hidden = {16, 12};
  c.mlp_hidden = {8, 4};
  c.image_shape = {size, size, 1};
  return c;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("attrivae_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace test_support
