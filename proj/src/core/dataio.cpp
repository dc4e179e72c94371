#include "core/dataio.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "core/random.hpp"
#include "core/stats.hpp"

namespace fs = std::filesystem;

namespace attrivae {

std::size_t Dataset::attribute_index(const std::string& name) const {
  const auto it = std::find(attribute_names.begin(), attribute_names.end(), name);
  if (it == attribute_names.end()) throw std::invalid_argument("unknown attribute '" + name + "'");
  return static_cast<std::size_t>(it - attribute_names.begin());
}

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& s : samples) ++counts[s.label ? 1 : 0];
  return counts;
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (s.volume.size() != shape.count())
      throw std::invalid_argument("sample '" + s.id + "' volume has " + std::to_string(s.volume.size()) +
                                  " voxels, dataset shape " + nn::to_string(shape) + " needs " +
                                  std::to_string(shape.count()));
    if (s.attributes.size() != attribute_names.size())
      throw std::invalid_argument("sample '" + s.id + "' has " + std::to_string(s.attributes.size()) +
                                  " attributes, expected " + std::to_string(attribute_names.size()));
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("sample '" + s.id + "' label must be 0 or 1");
  }
}

// ---------------------------------------------------------------- synthesis

void AnnulusSpec::validate() const {
  auto check_range = [](const Range& r, const char* field) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
      throw std::invalid_argument(std::string(field) + ": expected finite lo <= hi");
  };
  if (n_samples <= 0) throw std::invalid_argument("n_samples must be positive");
  if (image_size <= 0) throw std::invalid_argument("image_size must be positive");
  if (dimensions != 2 && dimensions != 3) throw std::invalid_argument("dimensions must be 2 or 3");
  check_range(outer_radius, "outer_radius");
  check_range(wall_thickness, "wall_thickness");
  check_range(wall_intensity, "wall_intensity");
  check_range(scar_fraction, "scar_fraction");
  if (outer_radius.lo <= 0) throw std::invalid_argument("outer_radius: must be positive");
  if (outer_radius.hi > 0.5 * image_size)
    throw std::invalid_argument("outer_radius: hi exceeds half the image_size");
  if (wall_thickness.lo <= 0) throw std::invalid_argument("wall_thickness: must be positive");
  if (!(wall_thickness.hi < outer_radius.lo))
    throw std::invalid_argument("wall_thickness: hi must be below outer_radius.lo so every ring has a cavity");
  if (wall_intensity.lo <= kCavityIntensity || wall_intensity.hi > 1.0)
    throw std::invalid_argument("wall_intensity: must lie in (" + std::to_string(kCavityIntensity) + ", 1]");
  if (scar_fraction.lo < 0 || scar_fraction.hi > 0.5)
    throw std::invalid_argument("scar_fraction: must lie within [0, 0.5]");
  if (!(scar_probability >= 0 && scar_probability <= 1))
    throw std::invalid_argument("scar_probability: must lie in [0, 1]");
}

Extent3 AnnulusSpec::shape() const {
  return dimensions == 2 ? Extent3{image_size, image_size, 1} : Extent3{image_size, image_size, image_size};
}

const std::vector<std::string>& annulus_attribute_names() {
  static const std::vector<std::string> names{"cavity_area", "wall_thickness", "wall_intensity", "scar_fraction"};
  return names;
}

Dataset generate_annulus_dataset(const AnnulusSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.shape = spec.shape();
  ds.attribute_names = annulus_attribute_names();
  Rng rng(spec.seed);
  const double center = 0.5 * spec.image_size;
  const int n = spec.image_size;
  const int nz = spec.dimensions == 3 ? n : 1;
  char id[32];
  for (int s = 0; s < spec.n_samples; ++s) {
    const double outer = rng.uniform(spec.outer_radius.lo, spec.outer_radius.hi);
    const double thickness = rng.uniform(spec.wall_thickness.lo, spec.wall_thickness.hi);
    const double intensity = rng.uniform(spec.wall_intensity.lo, spec.wall_intensity.hi);
    const bool scarred = rng.uniform() < spec.scar_probability;
    const double scar = scarred ? rng.uniform(spec.scar_fraction.lo, spec.scar_fraction.hi) : 0.0;
    const double scar_start = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double inner = outer - thickness;

    Sample sample;
    std::snprintf(id, sizeof id, "case%04d", s);
    sample.id = id;
    sample.volume.assign(ds.shape.count(), 0.0f);
    std::size_t cavity = 0;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < nz; ++z) {
          const double dx = x + 0.5 - center, dy = y + 0.5 - center;
          const double dz = spec.dimensions == 3 ? z + 0.5 - center : 0.0;
          const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
          float v = 0.0f;
          if (r < inner) {
            v = kCavityIntensity;
            ++cavity;
          } else if (r < outer) {
            v = static_cast<float>(intensity);
            if (scar > 0) {
              double offset = std::atan2(dy, dx) - scar_start;
              offset = std::fmod(offset + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
              if (offset < scar * 2.0 * std::numbers::pi) v = kScarIntensity;
            }
          }
          sample.volume[(static_cast<std::size_t>(x) * n + y) * nz + z] = v;
        }
    sample.attributes = {static_cast<double>(cavity), thickness, intensity, scar};
    sample.label = scar > 0 ? 1 : 0;
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

// ---------------------------------------------------------------- file I/O

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

Extent3 read_shape_file(const fs::path& shape_file) {
  std::ifstream in(shape_file);
  if (!in) throw std::runtime_error("cannot open shape file " + shape_file.string());
  Extent3 e;
  if (!(in >> e.x >> e.y >> e.z) || e.x <= 0 || e.y <= 0 || e.z <= 0)
    throw std::runtime_error("malformed shape file " + shape_file.string() + " (expected \"X Y Z\")");
  return e;
}

std::vector<float> read_volume(const fs::path& f32_file, Extent3 shape) {
  std::ifstream in(f32_file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open volume " + f32_file.string());
  std::vector<float> v(shape.count());
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(float))
    throw std::runtime_error("volume " + f32_file.string() + " is shorter than its shape " + nn::to_string(shape));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v) {
      auto bits = std::bit_cast<std::uint32_t>(f);
      bits = __builtin_bswap32(bits);
      f = std::bit_cast<float>(bits);
    }
  }
  return v;
}

void write_volume(const fs::path& f32_file, const std::vector<float>& volume, Extent3 shape) {
  if (volume.size() != shape.count()) throw std::invalid_argument("write_volume: size does not match shape");
  std::vector<float> data = volume;
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : data) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
  std::ofstream out(f32_file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + f32_file.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  fs::path shape_file = f32_file;
  shape_file.replace_extension(".shape");
  std::ofstream sf(shape_file, std::ios::trunc);
  if (!sf) throw std::runtime_error("cannot write " + shape_file.string());
  sf << shape.x << ' ' << shape.y << ' ' << shape.z << '\n';
}

void save_dataset(const Dataset& dataset, const fs::path& volume_dir, const fs::path& attribute_table) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(volume_dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + volume_dir.string() + ": " + ec.message());
  if (attribute_table.has_parent_path()) fs::create_directories(attribute_table.parent_path(), ec);
  std::ofstream csv(attribute_table, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write attribute table " + attribute_table.string());
  csv << "id";
  for (const auto& name : dataset.attribute_names) csv << ',' << name;
  csv << ",label\n";
  std::map<std::string, bool> written;
  for (const auto& s : dataset.samples) {
    csv << s.id;
    for (double a : s.attributes) csv << ',' << format_double(a);
    csv << ',' << s.label << '\n';
    if (!written.emplace(s.id, true).second) continue;
    write_volume(volume_dir / (s.id + ".f32"), s.volume, dataset.shape);
  }
  if (!csv) throw std::runtime_error("failed writing attribute table " + attribute_table.string());
}

Dataset load_dataset(const fs::path& volume_dir, const fs::path& attribute_table) {
  std::ifstream in(attribute_table);
  if (!in) throw std::runtime_error("cannot open attribute table " + attribute_table.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("attribute table " + attribute_table.string() + " is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.front() != "id" || header.back() != "label")
    throw std::runtime_error("attribute table header must be 'id,<attr...>,label'");
  Dataset ds;
  ds.attribute_names.assign(header.begin() + 1, header.end() - 1);
  bool have_shape = false;
  std::map<std::string, std::vector<float>> cache;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                               " columns, got " + std::to_string(cells.size()));
    Sample s;
    s.id = cells.front();
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) {
      double v;
      if (!parse_double(cells[k], v))
        throw std::runtime_error("row " + std::to_string(row) + ", column '" + header[k] +
                                 "': non-numeric value '" + cells[k] + "'");
      s.attributes.push_back(v);
    }
    double label;
    if (!parse_double(cells.back(), label) || (label != 0.0 && label != 1.0))
      throw std::runtime_error("row " + std::to_string(row) + ", column 'label': expected 0 or 1, got '" +
                               cells.back() + "'");
    s.label = static_cast<int>(label);

    const fs::path volume_file = volume_dir / (s.id + ".f32");
    const fs::path shape_file = volume_dir / (s.id + ".shape");
    if (!fs::exists(volume_file) || !fs::exists(shape_file))
      throw std::runtime_error("missing volume for id '" + s.id + "' (expected " + volume_file.string() + ")");
    const Extent3 shape = read_shape_file(shape_file);
    if (!have_shape) {
      ds.shape = shape;
      have_shape = true;
    } else if (!(shape == ds.shape)) {
      throw std::runtime_error("volume '" + s.id + "' has shape " + nn::to_string(shape) + ", expected " +
                               nn::to_string(ds.shape));
    }
    auto it = cache.find(s.id);
    if (it == cache.end()) it = cache.emplace(s.id, read_volume(volume_file, shape)).first;
    s.volume = it->second;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------- preprocessing

std::vector<float> preprocess(const std::vector<float>& volume, Extent3 shape, Extent3 target) {
  if (volume.empty()) throw std::invalid_argument("preprocess: empty volume");
  if (volume.size() != shape.count()) throw std::invalid_argument("preprocess: volume size does not match shape");
  // Centered window shared by the crop and the pad.
  Extent3 kept{std::min(shape.x, target.x), std::min(shape.y, target.y), std::min(shape.z, target.z)};
  const Extent3 src_off{(shape.x - kept.x) / 2, (shape.y - kept.y) / 2, (shape.z - kept.z) / 2};
  const Extent3 dst_off{(target.x - kept.x) / 2, (target.y - kept.y) / 2, (target.z - kept.z) / 2};

  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (int x = 0; x < kept.x; ++x)
    for (int y = 0; y < kept.y; ++y)
      for (int z = 0; z < kept.z; ++z) {
        const float v =
            volume[(static_cast<std::size_t>(x + src_off.x) * shape.y + (y + src_off.y)) * shape.z + (z + src_off.z)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  const bool constant = !(hi > lo);
  std::vector<float> out(target.count(), 0.0f);
  for (int x = 0; x < kept.x; ++x)
    for (int y = 0; y < kept.y; ++y)
      for (int z = 0; z < kept.z; ++z) {
        const float v =
            volume[(static_cast<std::size_t>(x + src_off.x) * shape.y + (y + src_off.y)) * shape.z + (z + src_off.z)];
        out[(static_cast<std::size_t>(x + dst_off.x) * target.y + (y + dst_off.y)) * target.z + (z + dst_off.z)] =
            constant ? 0.0f : (v - lo) / (hi - lo);
      }
  return out;
}

Dataset preprocess_dataset(const Dataset& dataset, Extent3 target_shape) {
  Dataset out = dataset;
  out.shape = target_shape;
  for (auto& s : out.samples) s.volume = preprocess(s.volume, dataset.shape, target_shape);
  return out;
}

Dataset oversample_minority(const Dataset& dataset, std::uint64_t seed) {
  const auto counts = dataset.class_counts();
  if (counts[0] == 0 || counts[1] == 0)
    throw std::invalid_argument("oversample_minority: dataset must contain both classes");
  const int minority = counts[0] < counts[1] ? 0 : 1;
  std::vector<std::size_t> minority_idx;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.samples[i].label == minority) minority_idx.push_back(i);
  Rng rng(seed);
  Dataset out;
  out.attribute_names = dataset.attribute_names;
  out.shape = dataset.shape;
  out.samples = dataset.samples;
  const std::size_t deficit = counts[1 - minority] - counts[static_cast<std::size_t>(minority)];
  for (std::size_t i = 0; i < deficit; ++i) out.samples.push_back(dataset.samples[minority_idx[rng.index(minority_idx.size())]]);
  rng.shuffle(out.samples.begin(), out.samples.end());
  return out;
}

// ---------------------------------------------------------------- RFE

std::vector<double> fit_linear_svm(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                                   double C) {
  const std::size_t n = features.size();
  if (n == 0 || labels.size() != n) throw std::invalid_argument("fit_linear_svm: features/labels mismatch");
  const std::size_t p = features.front().size();
  // Bias as an extra constant feature.
  std::vector<double> w(p + 1, 0.0), alpha(n, 0.0), q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = 1.0;
    for (double v : features[i]) q[i] += v * v;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(0x5eed);
  for (int epoch = 0; epoch < 2000; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double pg_max = -std::numeric_limits<double>::infinity(), pg_min = -pg_max;
    for (std::size_t i : order) {
      const double y = labels[i] ? 1.0 : -1.0;
      const auto& x = features[i];
      double margin = w[p];
      for (std::size_t j = 0; j < p; ++j) margin += w[j] * x[j];
      const double g = y * margin - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == C) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / q[i], 0.0, C);
      const double step = (alpha[i] - old) * y;
      for (std::size_t j = 0; j < p; ++j) w[j] += step * x[j];
      w[p] += step;
    }
    if (pg_max - pg_min < 1e-4) break;
  }
  return w;
}

std::vector<std::string> rfe_select(const Dataset& dataset, std::size_t n_keep, double C) {
  const std::size_t k = dataset.attribute_names.size();
  if (n_keep == 0 || n_keep > k)
    throw std::invalid_argument("rfe_select: n_keep must lie in [1, " + std::to_string(k) + "]");
  const auto counts = dataset.class_counts();
  if (counts[0] == 0 || counts[1] == 0) throw std::invalid_argument("rfe_select: labels are a single class");

  // Standardized attribute columns.
  std::vector<std::vector<double>> cols(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> c;
    for (const auto& s : dataset.samples) c.push_back(s.attributes[j]);
    const double m = stats::mean(c);
    const double sd = std::sqrt(stats::variance(c));
    for (auto& v : c) v = sd > 0 ? (v - m) / sd : 0.0;
    cols[j] = std::move(c);
  }
  std::vector<int> labels;
  for (const auto& s : dataset.samples) labels.push_back(s.label);

  std::vector<std::size_t> remaining(k);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<double> weights;
  while (true) {
    std::vector<std::vector<double>> rows(dataset.size(), std::vector<double>(remaining.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i)
      for (std::size_t j = 0; j < remaining.size(); ++j) rows[i][j] = cols[remaining[j]][i];
    weights = fit_linear_svm(rows, labels, C);
    if (remaining.size() <= n_keep) break;
    std::size_t weakest = 0;
    for (std::size_t j = 1; j < remaining.size(); ++j)
      if (std::abs(weights[j]) < std::abs(weights[weakest])) weakest = j;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(weakest));
  }
  std::vector<std::size_t> order(remaining.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(weights[a]) > std::abs(weights[b]); });
  std::vector<std::string> out;
  for (std::size_t j : order) out.push_back(dataset.attribute_names[remaining[j]]);
  return out;
}

// ---------------------------------------------------------------- hashing

std::string dataset_content_hash(const Dataset& dataset) {
  std::string body;
  body += "shape " + std::to_string(dataset.shape.x) + " " + std::to_string(dataset.shape.y) + " " +
          std::to_string(dataset.shape.z) + "\n";
  body += "attributes";
  for (const auto& a : dataset.attribute_names) body += " " + a;
  body += "\n";
  for (const auto& s : dataset.samples) {
    body += s.id;
    for (double a : s.attributes) body += " " + format_double(a);
    body += " " + std::to_string(s.label) + "\n";
    for (float f : s.volume) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) body.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  const std::string header = "blob " + std::to_string(body.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size() + 1);  // includes the NUL
  EVP_DigestUpdate(ctx, body.data(), body.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace attrivae
