#include "core/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "core/attention.hpp"
#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/evaluate.hpp"
#include "core/generate.hpp"
#include "core/image_io.hpp"
#include "core/random.hpp"
#include "core/stats.hpp"

namespace attrivae {

namespace fs = std::filesystem;
using json_io::Json;

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream f(file, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + file.string());
  f << text;
}

const Sample& find_sample(const Dataset& ds, const std::string& id) {
  for (const auto& s : ds.samples)
    if (s.id == id) return s;
  throw ConfigError("sample '" + id + "' is not in the dataset");
}

RgbImage tile_of(std::span<const float> volume, nn::Extent3 shape) { return gray_slice(volume, shape, shape.z / 2); }

VectorXd encode_one(const Model<float>& model, const Sample& s, nn::Extent3 shape) {
  const auto lat = model.encode(make_batch<float>({&s.volume}, shape));
  return lat.mu.col(0).cast<double>();
}

struct Loaded {
  ModelCheckpoint checkpoint;
  Model<float> model;
  Dataset dataset;
  Dataset test;
};

Loaded load_for_inference(const RunConfig& config, const Logger& log) {
  ModelCheckpoint ck = load_checkpoint(config.checkpoint_dir());
  Model<float> model = restore(ck);
  Dataset ds = load_run_dataset(config, ck.model.image_shape);
  if (!ck.dataset_hash.empty() && dataset_content_hash(ds) != ck.dataset_hash)
    emit(log, "note: dataset differs from the one the checkpoint was trained on");
  TrainConfig tc = config.train;
  tc.seed = ck.seed;
  Dataset test = split_for_run(ds, tc).test;
  return {std::move(ck), std::move(model), std::move(ds), std::move(test)};
}

// Dimensions shown for each attribute: mapped ones for regularized models,
// max-MI ones otherwise.
std::map<std::string, int> display_dims(const Loaded& l) {
  std::map<std::string, int> out;
  if (l.checkpoint.model.toggles.use_ar) {
    for (const auto& [name, dim] : l.checkpoint.mapping.entries) out[name] = dim;
    return out;
  }
  const auto names = l.checkpoint.mapping.size() ? l.checkpoint.mapping.names() : l.dataset.attribute_names;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(l.test.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto c = l.test.attribute_index(names[k]);
    for (std::size_t i = 0; i < l.test.size(); ++i)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = l.test.samples[i].attributes[c];
  }
  const auto dims = metrics::interpretability_dims(encode_means(l.model, l.test), A, names, nullptr);
  for (std::size_t k = 0; k < names.size(); ++k) out[names[k]] = dims[k];
  return out;
}

int dim_for(const std::map<std::string, int>& dims, const std::string& attribute) {
  const auto it = dims.find(attribute);
  if (it == dims.end()) throw ConfigError("attribute '" + attribute + "' is not mapped to a latent dimension");
  return it->second;
}

}  // namespace

Dataset load_run_dataset(const RunConfig& config, nn::Extent3 shape) {
  const fs::path vdir = config.volume_dir(), table = config.attribute_table();
  if (!fs::exists(table)) throw ConfigError("attribute table not found: " + table.string() + " (run synth first?)");
  Dataset ds = load_dataset(vdir, table);
  return preprocess_dataset(ds, shape);
}

AttributeMapping resolve_mapping(const RunConfig& config, const Dataset& dataset) {
  if (config.mapping) return *config.mapping;
  std::vector<std::string> names = dataset.attribute_names;
  if (config.data.rfe_keep > 0) {
    if (static_cast<std::size_t>(config.data.rfe_keep) > names.size())
      throw ConfigError("data.rfe_keep exceeds the number of attributes");
    names = rfe_select(dataset, static_cast<std::size_t>(config.data.rfe_keep));
  }
  if (static_cast<int>(names.size()) > config.model.latent_dim)
    throw ConfigError("more attributes than latent dimensions; set data.rfe_keep or an explicit mapping");
  AttributeMapping m;
  for (std::size_t k = 0; k < names.size(); ++k) m.entries.emplace_back(names[k], static_cast<int>(k));
  return m;
}

std::string cmd_synth(const RunConfig& config, const Logger& log) {
  config.validate();
  const Dataset ds = generate_annulus_dataset(config.data.synthetic);
  emit(log, "writing " + std::to_string(ds.size()) + " samples to " + config.volume_dir().string());
  save_dataset(ds, config.volume_dir(), config.attribute_table());
  const auto counts = ds.class_counts();
  std::ostringstream out;
  out << "samples: " << ds.size() << " (label 0: " << counts[0] << ", label 1: " << counts[1] << ")\n";
  out << "shape: " << nn::to_string(ds.shape) << "\n";
  for (std::size_t k = 0; k < ds.attribute_names.size(); ++k) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : ds.samples) {
      lo = std::min(lo, s.attributes[k]);
      hi = std::max(hi, s.attributes[k]);
    }
    out << ds.attribute_names[k] << ": [" << fmt(lo) << ", " << fmt(hi) << "]\n";
  }
  out << "volumes: " << config.volume_dir().string() << "\n";
  out << "attributes: " << config.attribute_table().string() << "\n";
  return out.str();
}

std::string cmd_train(const RunConfig& config, const Logger& log) {
  config.validate();
  const Dataset ds = load_run_dataset(config, config.model.image_shape);
  const AttributeMapping mapping = resolve_mapping(config, ds);
  Model<float> model(config.model);
  model.init_weights(config.seed);
  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "config.json", to_json(config).dump(2) + "\n");

  const auto result = train(model, ds, mapping, config.train, [&](const TrainLogRow& r) {
    std::ostringstream line;
    line << "epoch " << r.epoch << " total " << fmt(r.train.total) << " recon " << fmt(r.train.recon) << " kl "
         << fmt(r.train.kl) << " mlp " << fmt(r.train.mlp) << " ar " << fmt(r.train.ar);
    if (r.validation) line << " val_total " << fmt(r.validation->total);
    if (r.interpretability) line << " val_interpretability " << fmt(*r.interpretability);
    emit(log, line.str());
  });
  save_checkpoint(result.final_checkpoint, config.output_dir / "checkpoint" / "final");
  save_checkpoint(result.best_checkpoint, config.output_dir / "checkpoint" / "best");
  write_train_log(result.log, config.output_dir / "train_log.csv");

  std::ostringstream out;
  out << "variant: " << to_string(config.variant) << "\n";
  out << "epochs: " << result.log.back().epoch << (result.stopped_early ? " (early stop)" : "") << "\n";
  out << "final train total: " << fmt(result.log.back().train.total) << "\n";
  out << "best validation epoch: " << result.best_epoch << "\n";
  out << "checkpoints: " << (config.output_dir / "checkpoint").string() << "/{final,best}\n";
  out << "log: " << (config.output_dir / "train_log.csv").string() << "\n";
  return out.str();
}

std::string cmd_eval(const RunConfig& config, const Logger& log) {
  config.validate();
  const Loaded l = load_for_inference(config, log);
  const Dataset& target = config.eval.split == "all" ? l.dataset : l.test;
  EvaluationOptions opt;
  opt.use_mapping = l.checkpoint.model.toggles.use_ar;
  opt.bins = config.eval.bins;
  emit(log, "evaluating " + std::to_string(target.size()) + " samples");
  const auto report = evaluate(l.model, target, l.checkpoint.mapping, opt);
  const std::string json = metrics::to_json(report);
  write_text(config.output_dir / "metrics.json", json);
  return json;
}

std::string cmd_traverse(const RunConfig& config, const Logger& log) {
  config.validate();
  const Loaded l = load_for_inference(config, log);
  const auto& t = config.traverse;
  const nn::Extent3 shape = l.checkpoint.model.image_shape;
  const fs::path dir = config.output_dir / "traverse";
  fs::create_directories(dir);

  std::vector<TraversalRow> rows;
  std::vector<int> row_dims;  // latent dimension for attention, -1 for interpolation rows
  if (t.between.size() == 2) {
    const auto za = encode_one(l.model, find_sample(l.dataset, t.between[0]), shape);
    const auto zb = encode_one(l.model, find_sample(l.dataset, t.between[1]), shape);
    rows.push_back(interpolation_row(l.model, za, zb, t.steps, t.between[0] + "->" + t.between[1]));
    row_dims.push_back(-1);
  }
  std::vector<std::string> scan = t.scan;
  if (scan.empty() && t.between.empty()) scan = l.checkpoint.mapping.names();
  if (!scan.empty()) {
    const auto dims = display_dims(l);
    const Sample& base = t.sample.empty() ? l.test.samples.front() : find_sample(l.dataset, t.sample);
    const VectorXd z = encode_one(l.model, base, shape);
    const Eigen::MatrixXd Z = encode_means(l.model, l.test);
    for (const auto& attr : scan) {
      const int d = dim_for(dims, attr);
      std::vector<double> col(static_cast<std::size_t>(Z.rows()));
      for (Eigen::Index i = 0; i < Z.rows(); ++i) col[static_cast<std::size_t>(i)] = Z(i, d);
      const auto range = quantile_range(col, t.coverage);
      AttributeMapping single;
      single.entries.emplace_back(attr, d);
      rows.push_back(scan_attribute(l.model, z, attr, single, range, t.steps, ScanSpacing::centered));
      row_dims.push_back(d);
    }
  }

  std::ostringstream manifest;
  manifest << "row,column,value,attribute,file\n";
  std::vector<RgbImage> tiles;
  int tile_count = 0, overlay_count = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::vector<RgbImage> overlays;
    for (std::size_t c = 0; c < row.volumes.size(); ++c) {
      const std::string stem = "row" + std::to_string(r) + "_col" + std::to_string(c);
      RgbImage tile = tile_of(row.volumes[c], shape);
      write_png(tile, dir / (stem + ".png"));
      tiles.push_back(tile);
      ++tile_count;
      manifest << r << ',' << c << ',' << fmt(row.step_values[c]) << ',' << row.descriptor << ',' << stem << ".png\n";
      if (t.attend && row_dims[r] >= 0) {
        const auto map = attention_map(l.model, row.volumes[c], row_dims[r], row.descriptor);
        const auto ov = overlay(map, row.volumes[c], t.alpha);
        const RgbImage& o = ov[static_cast<std::size_t>(shape.z / 2)];
        write_png(o, dir / (stem + "_attention.png"));
        overlays.push_back(o);
        ++overlay_count;
      }
    }
    tiles.insert(tiles.end(), overlays.begin(), overlays.end());
  }
  write_png(montage(tiles, t.steps), dir / "montage.png");
  write_text(dir / "manifest.csv", manifest.str());
  std::ostringstream out;
  out << "rows: " << rows.size() << "\ntiles: " << tile_count << "\noverlay tiles: " << overlay_count
      << "\nmontage: " << (dir / "montage.png").string() << "\nmanifest: " << (dir / "manifest.csv").string() << "\n";
  return out.str();
}

std::string cmd_attend(const RunConfig& config, const Logger& log) {
  config.validate();
  const Loaded l = load_for_inference(config, log);
  const auto& a = config.attend;
  const nn::Extent3 shape = l.checkpoint.model.image_shape;
  const fs::path dir = config.output_dir / "attend";
  fs::create_directories(dir);
  const auto dims = display_dims(l);
  std::vector<std::string> samples = a.samples;
  if (samples.empty()) samples.push_back(l.test.samples.front().id);
  std::vector<std::string> attributes = a.attributes;
  if (attributes.empty()) attributes = l.checkpoint.mapping.names();

  Rng rng(derive_seed(config.seed, 17));
  int files = 0;
  for (const auto& id : samples) {
    const Sample& s = find_sample(l.dataset, id);
    for (const auto& attr : attributes) {
      std::vector<double> noise;
      if (a.sampled_z)
        for (int d = 0; d < l.model.latent_dim(); ++d) noise.push_back(rng.normal());
      const auto map = attention_map(l.model, s.volume, dim_for(dims, attr), attr, a.sampled_z ? &noise : nullptr);
      const auto slices = overlay(map, s.volume, a.alpha);
      for (std::size_t z = 0; z < slices.size(); ++z) {
        write_png(slices[z], dir / (id + "_" + attr + "_" + std::to_string(z) + ".png"));
        ++files;
      }
      if (a.save_raw) write_volume(dir / (id + "_" + attr + ".f32"), map.heat, shape);
    }
  }
  return "overlays: " + std::to_string(files) + "\ndirectory: " + dir.string() + "\n";
}

std::string cmd_project(const RunConfig& config, const Logger& log) {
  config.validate();
  const Loaded l = load_for_inference(config, log);
  const auto dims = display_dims(l);
  std::string ax = config.project.attr_x, ay = config.project.attr_y;
  const auto names = l.checkpoint.mapping.names();
  if (ax.empty() && names.size() > 0) ax = names[0];
  if (ay.empty() && names.size() > 1) ay = names[1];
  if (ax.empty() || ay.empty()) throw ConfigError("project needs two attributes (project.attr_x, project.attr_y)");
  const int dx = dim_for(dims, ax), dy = dim_for(dims, ay);

  const Eigen::MatrixXd Z = encode_means(l.model, l.dataset);
  std::vector<double> xs, ys;
  std::vector<int> labels;
  std::vector<std::array<float, 3>> colors;
  std::ostringstream csv;
  csv << "id," << ax << "_z" << dx << ',' << ay << "_z" << dy << ",label\n";
  for (std::size_t i = 0; i < l.dataset.size(); ++i) {
    const auto& s = l.dataset.samples[i];
    xs.push_back(Z(static_cast<Eigen::Index>(i), dx));
    ys.push_back(Z(static_cast<Eigen::Index>(i), dy));
    labels.push_back(s.label);
    colors.push_back(s.label ? std::array<float, 3>{0.85f, 0.2f, 0.15f} : std::array<float, 3>{0.15f, 0.35f, 0.8f});
    csv << s.id << ',' << fmt(xs.back()) << ',' << fmt(ys.back()) << ',' << s.label << '\n';
  }
  const fs::path dir = config.output_dir / "project";
  write_text(dir / "projection.csv", csv.str());
  write_png(scatter_plot(xs, ys, colors), dir / "projection.png");

  // Linear separability of the two classes in the projection.
  std::string separability = "n/a (single class)";
  const auto counts = l.dataset.class_counts();
  if (counts[0] > 0 && counts[1] > 0) {
    const double mx = stats::mean(xs), my = stats::mean(ys);
    const double sx = std::sqrt(stats::variance(xs)), sy = std::sqrt(stats::variance(ys));
    std::vector<std::vector<double>> f;
    for (std::size_t i = 0; i < xs.size(); ++i)
      f.push_back({sx > 0 ? (xs[i] - mx) / sx : 0.0, sy > 0 ? (ys[i] - my) / sy : 0.0});
    const auto w = fit_linear_svm(f, labels, 10.0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
      correct += ((w[0] * f[i][0] + w[1] * f[i][1] + w[2] > 0.0 ? 1 : 0) == labels[i]) ? 1 : 0;
    separability = fmt(static_cast<double>(correct) / static_cast<double>(f.size()));
  }
  return "points: " + std::to_string(xs.size()) + "\nx: " + ax + " (z" + std::to_string(dx) + ")\ny: " + ay + " (z" +
         std::to_string(dy) + ")\nlinear separability accuracy: " + separability + "\ncsv: " +
         (dir / "projection.csv").string() + "\n";
}

std::string cmd_sweep(const RunConfig& config, const Logger& log) {
  config.validate();
  const Dataset ds = load_run_dataset(config, config.model.image_shape);
  const AttributeMapping mapping = resolve_mapping(config, ds);
  emit(log, "sweep over " + std::to_string(config.sweep.size()) + " grid points");
  const auto rows = hyperparameter_sweep(config.model, ds, mapping, config.train, config.sweep,
                                         [&](std::size_t i, const SweepRow& r) {
                                           emit(log, "point " + std::to_string(i + 1) + ": beta " + fmt(r.beta) +
                                                         " gamma " + fmt(r.gamma) + " delta " + fmt(r.delta) +
                                                         " interpretability " + fmt(r.interpretability) +
                                                         " image_mi " + fmt(r.image_mi));
                                         });
  const fs::path dir = config.output_dir / "sweep";
  fs::create_directories(dir);
  write_sweep_table(rows, dir / "sweep.csv");
  std::vector<double> xs, ys;
  std::vector<std::array<float, 3>> colors;
  double gmax = 0.0;
  for (const auto& r : rows) gmax = std::max(gmax, r.gamma);
  for (const auto& r : rows) {
    xs.push_back(r.interpretability);
    ys.push_back(r.image_mi);
    colors.push_back(viridis(gmax > 0 ? r.gamma / gmax : 0.0));
  }
  write_png(scatter_plot(xs, ys, colors), dir / "sweep.png");
  std::ifstream f(dir / "sweep.csv");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string run_command(const std::string& command, const RunConfig& config, const Logger& log) {
  if (command == "synth") return cmd_synth(config, log);
  if (command == "train") return cmd_train(config, log);
  if (command == "eval") return cmd_eval(config, log);
  if (command == "traverse") return cmd_traverse(config, log);
  if (command == "attend") return cmd_attend(config, log);
  if (command == "project") return cmd_project(config, log);
  if (command == "sweep") return cmd_sweep(config, log);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace attrivae
