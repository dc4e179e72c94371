#pragma once

// Latent interpolation and attribute scanning along regularized dimensions.

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

#include "core/dataio.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"

namespace attrivae {

using Eigen::VectorXd;

// z_t = (1 - t) z_a + t z_b for t = i / (steps - 1); endpoints exact.
std::vector<VectorXd> interpolate(const VectorXd& z_a, const VectorXd& z_b, int steps);

enum class ScanSpacing {
  uniform,   // `steps` equally spaced values over [lo, hi]
  centered,  // odd steps: middle value is the original coordinate (clamped
             // into [lo, hi]), equal spacing on either side
};

struct TraversalRow {
  std::string descriptor;
  std::vector<double> step_values;
  std::vector<VectorXd> codes;
  std::vector<std::vector<float>> volumes;
};

struct TraversalGrid {
  std::vector<TraversalRow> rows;
};

std::vector<double> scan_values(double lo, double hi, int steps, ScanSpacing spacing, double original);

// Copies of z with z[d_k] replaced by the scan values, decoded in
// evaluation mode. Throws for attributes absent from the mapping.
TraversalRow scan_attribute(const Model<float>& model, const VectorXd& z, const std::string& attribute,
                            const AttributeMapping& mapping, std::array<double, 2> dim_range, int steps,
                            ScanSpacing spacing = ScanSpacing::uniform);

TraversalRow interpolation_row(const Model<float>& model, const VectorXd& z_a, const VectorXd& z_b, int steps,
                               const std::string& descriptor);

std::vector<std::vector<float>> decode_codes(const Model<float>& model, const std::vector<VectorXd>& codes);

// Central `coverage` quantile interval of values (type-7 quantiles).
std::array<double, 2> quantile_range(std::span<const double> values, double coverage);
std::array<double, 2> empirical_dim_range(const Model<float>& model, const Dataset& dataset, int dim,
                                          double coverage = 0.98);

// Shape measurements on (possibly decoded) annulus images. The cavity is the
// region connected to the image center with intensities between the scar
// and wall levels; the ring width is the difference of equivalent radii of
// the foreground (anything above the background) and the cavity.
double measure_cavity(std::span<const float> volume, nn::Extent3 shape);
double measure_ring_width(std::span<const float> volume, nn::Extent3 shape);

inline constexpr float kCavityBandLo = 0.5f * (kScarIntensity + kCavityIntensity);
inline constexpr float kCavityBandHi = 0.5f * (kCavityIntensity + 0.7f);
inline constexpr float kForegroundLevel = 0.5f * kScarIntensity;

// Number of strict decreases between consecutive values.
int count_inversions(std::span<const double> values);

}  // namespace attrivae
