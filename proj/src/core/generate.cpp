#include "core/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "core/evaluate.hpp"
#include "core/stats.hpp"

namespace attrivae {

std::vector<VectorXd> interpolate(const VectorXd& z_a, const VectorXd& z_b, int steps) {
  if (steps < 2) throw std::invalid_argument("interpolate: steps must be at least 2");
  if (z_a.size() != z_b.size()) throw std::invalid_argument("interpolate: codes differ in length");
  std::vector<VectorXd> out;
  for (int i = 0; i < steps; ++i) {
    if (i == 0) {
      out.push_back(z_a);
    } else if (i == steps - 1) {
      out.push_back(z_b);
    } else {
      const double t = static_cast<double>(i) / (steps - 1);
      out.push_back((1.0 - t) * z_a + t * z_b);
    }
  }
  return out;
}

std::vector<double> scan_values(double lo, double hi, int steps, ScanSpacing spacing, double original) {
  if (steps < 1) throw std::invalid_argument("scan: steps must be positive");
  if (!(lo <= hi)) throw std::invalid_argument("scan: range must satisfy lo <= hi");
  std::vector<double> v(static_cast<std::size_t>(steps));
  if (steps == 1) {
    v[0] = spacing == ScanSpacing::centered ? std::clamp(original, lo, hi) : 0.5 * (lo + hi);
    return v;
  }
  if (spacing == ScanSpacing::uniform || steps % 2 == 0) {
    for (int i = 0; i < steps; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
    v.back() = hi;
    return v;
  }
  const int half = steps / 2;
  const double c = std::clamp(original, lo, hi);
  for (int i = 0; i <= half; ++i) {
    v[static_cast<std::size_t>(i)] = lo + (c - lo) * i / half;
    v[static_cast<std::size_t>(half + i)] = c + (hi - c) * i / half;
  }
  v[static_cast<std::size_t>(half)] = c;
  return v;
}

std::vector<std::vector<float>> decode_codes(const Model<float>& model, const std::vector<VectorXd>& codes) {
  std::vector<std::vector<float>> out;
  const std::size_t vox = model.config().image_shape.count();
  for (std::size_t b = 0; b < codes.size(); b += kEvalBatch) {
    const std::size_t e = std::min(codes.size(), b + kEvalBatch);
    nn::Matrix<float> z(model.latent_dim(), static_cast<Eigen::Index>(e - b));
    for (std::size_t i = b; i < e; ++i) {
      if (codes[i].size() != model.latent_dim()) throw std::invalid_argument("decode: latent code has wrong length");
      z.col(static_cast<Eigen::Index>(i - b)) = codes[i].cast<float>();
    }
    const auto x = model.decode(z);
    for (std::size_t i = 0; i < e - b; ++i) {
      const float* p = x.plane(0, static_cast<int>(i));
      out.emplace_back(p, p + vox);
    }
  }
  return out;
}

TraversalRow scan_attribute(const Model<float>& model, const VectorXd& z, const std::string& attribute,
                            const AttributeMapping& mapping, std::array<double, 2> dim_range, int steps,
                            ScanSpacing spacing) {
  const auto dim = mapping.dim_of(attribute);
  if (!dim) throw std::invalid_argument("scan: attribute '" + attribute + "' is not in the mapping");
  if (*dim >= z.size()) throw std::invalid_argument("scan: mapped dimension exceeds the latent size");
  TraversalRow row;
  row.descriptor = attribute;
  row.step_values = scan_values(dim_range[0], dim_range[1], steps, spacing, z(*dim));
  for (double v : row.step_values) {
    VectorXd c = z;
    c(*dim) = v;
    row.codes.push_back(std::move(c));
  }
  row.volumes = decode_codes(model, row.codes);
  return row;
}

TraversalRow interpolation_row(const Model<float>& model, const VectorXd& z_a, const VectorXd& z_b, int steps,
                               const std::string& descriptor) {
  TraversalRow row;
  row.descriptor = descriptor;
  row.codes = interpolate(z_a, z_b, steps);
  for (int i = 0; i < steps; ++i) row.step_values.push_back(static_cast<double>(i) / (steps - 1));
  row.volumes = decode_codes(model, row.codes);
  return row;
}

std::array<double, 2> quantile_range(std::span<const double> values, double coverage) {
  if (values.empty()) throw std::invalid_argument("quantile_range: no values");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw std::invalid_argument("coverage must lie in (0, 1]");
  const std::vector<double> v(values.begin(), values.end());
  const double tail = 0.5 * (1.0 - coverage);
  return {stats::quantile(v, tail), stats::quantile(v, 1.0 - tail)};
}

std::array<double, 2> empirical_dim_range(const Model<float>& model, const Dataset& dataset, int dim,
                                          double coverage) {
  if (dataset.empty()) throw std::invalid_argument("empirical_dim_range: empty dataset");
  if (dim < 0 || dim >= model.latent_dim()) throw std::invalid_argument("empirical_dim_range: dimension out of range");
  const Eigen::MatrixXd Z = encode_means(model, dataset);
  std::vector<double> col(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) col[static_cast<std::size_t>(i)] = Z(i, dim);
  return quantile_range(col, coverage);
}

double measure_cavity(std::span<const float> volume, nn::Extent3 shape) {
  if (volume.size() != shape.count()) throw std::invalid_argument("measure_cavity: volume size differs from shape");
  auto in_band = [&](std::size_t i) { return volume[i] > kCavityBandLo && volume[i] < kCavityBandHi; };
  auto index = [&](int x, int y, int z) { return (static_cast<std::size_t>(x) * shape.y + y) * shape.z + z; };
  std::vector<char> seen(volume.size(), 0);
  std::vector<std::array<int, 3>> stack;
  // Seed from the central voxel(s): for even sides the center lies between
  // two voxels, so try every voxel touching it.
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const int x = (shape.x - 1 + dx) / 2, y = (shape.y - 1 + dy) / 2, z = (shape.z - 1 + dz) / 2;
        const std::size_t i = index(x, y, z);
        if (!seen[i] && in_band(i)) {
          seen[i] = 1;
          stack.push_back({x, y, z});
        }
      }
  std::size_t count = 0;
  while (!stack.empty()) {
    const auto p = stack.back();
    stack.pop_back();
    ++count;
    static constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& s : kSteps) {
      const int x = p[0] + s[0], y = p[1] + s[1], z = p[2] + s[2];
      if (x < 0 || y < 0 || z < 0 || x >= shape.x || y >= shape.y || z >= shape.z) continue;
      const std::size_t i = index(x, y, z);
      if (seen[i] || !in_band(i)) continue;
      seen[i] = 1;
      stack.push_back({x, y, z});
    }
  }
  return static_cast<double>(count);
}

double measure_ring_width(std::span<const float> volume, nn::Extent3 shape) {
  if (volume.size() != shape.count()) throw std::invalid_argument("measure_ring_width: volume size differs from shape");
  const double cavity = measure_cavity(volume, shape);
  double foreground = 0.0;
  for (float v : volume) foreground += v > kForegroundLevel ? 1.0 : 0.0;
  foreground = std::max(foreground, cavity);
  const bool volumetric = shape.z > 1;
  auto radius = [volumetric](double count) {
    return volumetric ? std::cbrt(count * 3.0 / (4.0 * std::numbers::pi)) : std::sqrt(count / std::numbers::pi);
  };
  return radius(foreground) - radius(cavity);
}

int count_inversions(std::span<const double> values) {
  int n = 0;
  for (std::size_t i = 1; i < values.size(); ++i) n += values[i] < values[i - 1] ? 1 : 0;
  return n;
}

}  // namespace attrivae
