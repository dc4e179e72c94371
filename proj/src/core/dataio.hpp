#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace attrivae {

using nn::Extent3;

// One image volume with its scalar attributes and binary class label.
// `attributes[k]` belongs to `Dataset::attribute_names[k]`.
struct Sample {
  std::string id;
  std::vector<float> volume;  // C-order (x, y, z), z fastest
  std::vector<double> attributes;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> attribute_names;
  Extent3 shape;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Index of an attribute column; throws if absent.
  std::size_t attribute_index(const std::string& name) const;
  std::array<std::size_t, 2> class_counts() const;
  // Checks shape and attribute-key consistency; throws on violation.
  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Synthetic ring images: a bright wall of thickness t around a mid-gray
// cavity on a dark background, optionally with a darkened wall sector (scar).
// Radii are in pixels. `dimensions` selects disc (2) or spherical shell (3).
struct AnnulusSpec {
  int n_samples = 2000;
  int image_size = 64;
  int dimensions = 2;
  Range outer_radius{18.0, 28.0};
  Range wall_thickness{3.0, 9.0};
  Range wall_intensity{0.7, 1.0};
  Range scar_fraction{0.1, 0.4};
  double scar_probability = 0.5;
  std::uint64_t seed = 7;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  Extent3 shape() const;
};

inline constexpr float kCavityIntensity = 0.4f;
inline constexpr float kScarIntensity = 0.15f;

// Attribute names produced by the generator, in column order.
const std::vector<std::string>& annulus_attribute_names();

Dataset generate_annulus_dataset(const AnnulusSpec& spec);

// <dir>/<id>.f32 (little-endian float32) + <dir>/<id>.shape ("X Y Z") per
// sample, plus an attribute table CSV `id,<attr...>,label`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& volume_dir,
                  const std::filesystem::path& attribute_table);
Dataset load_dataset(const std::filesystem::path& volume_dir, const std::filesystem::path& attribute_table);

std::vector<float> read_volume(const std::filesystem::path& f32_file, Extent3 shape);
void write_volume(const std::filesystem::path& f32_file, const std::vector<float>& volume, Extent3 shape);
Extent3 read_shape_file(const std::filesystem::path& shape_file);

// Center-crop to target, min-max scale to [0,1] (constant -> zeros), then
// zero-pad to target. Idempotent.
std::vector<float> preprocess(const std::vector<float>& volume, Extent3 shape, Extent3 target_shape);
Dataset preprocess_dataset(const Dataset& dataset, Extent3 target_shape);

// Duplicates minority-class samples (sampling with replacement) until both
// classes have equal counts, then shuffles deterministically.
Dataset oversample_minority(const Dataset& dataset, std::uint64_t seed);

// Recursive feature elimination with a linear SVM (hinge loss, penalty C).
// Returns the surviving attributes, most important first.
std::vector<std::string> rfe_select(const Dataset& dataset, std::size_t n_keep, double C = 10.0);

// Linear SVM weights (bias last) fitted by dual coordinate descent on rows
// of `features` with labels in {0,1}. Exposed for testing.
std::vector<double> fit_linear_svm(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                                   double C);

// Content hash of a dataset in the style of a git blob id (SHA-1 over
// "blob <len>\0" + canonical serialization).
std::string dataset_content_hash(const Dataset& dataset);

}  // namespace attrivae
