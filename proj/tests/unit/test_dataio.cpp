#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "core/dataio.hpp"
#include "core/generate.hpp"
#include "core/random.hpp"
#include "test_support.hpp"

using namespace attrivae;

namespace {

AnnulusSpec small_spec(int n, std::uint64_t seed = 7) {
  AnnulusSpec s;
  s.n_samples = n;
  s.seed = seed;
  return s;
}

Dataset labelled(int n0, int n1) {
  Dataset ds;
  ds.shape = {2, 2, 1};
  ds.attribute_names = {"a"};
  for (int i = 0; i < n0 + n1; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.volume.assign(4, static_cast<float>(i));
    s.attributes = {static_cast<double>(i)};
    s.label = i < n0 ? 0 : 1;
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("annulus generator is deterministic") {
  const auto a = generate_annulus_dataset(small_spec(10));
  const auto b = generate_annulus_dataset(small_spec(10));
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].volume == b.samples[i].volume);
    CHECK(a.samples[i].attributes == b.samples[i].attributes);
    CHECK(a.samples[i].label == b.samples[i].label);
  }
  CHECK(dataset_content_hash(a) == dataset_content_hash(b));
  CHECK(dataset_content_hash(a) != dataset_content_hash(generate_annulus_dataset(small_spec(10, 8))));
}

TEST_CASE("annulus samples satisfy the dataset invariants") {
  const auto ds = generate_annulus_dataset(small_spec(40));
  CHECK(ds.attribute_names == annulus_attribute_names());
  CHECK(ds.shape == nn::Extent3{64, 64, 1});
  CHECK_NOTHROW(ds.validate());
  const auto cavity = ds.attribute_index("cavity_area");
  const auto scar = ds.attribute_index("scar_fraction");
  for (const auto& s : ds.samples) {
    CHECK(s.volume.size() == ds.shape.count());
    for (float v : s.volume) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    CHECK(s.attributes.size() == ds.attribute_names.size());
    // The stored cavity area matches a flood fill of the rendered image.
    const double measured = measure_cavity(s.volume, ds.shape);
    CHECK(std::abs(measured - s.attributes[cavity]) <= 0.02 * s.attributes[cavity]);
    CHECK((s.label == 1) == (s.attributes[scar] > 0.0));
  }
}

TEST_CASE("no scar probability means no pathological samples") {
  auto spec = small_spec(20);
  spec.scar_probability = 0.0;
  const auto ds = generate_annulus_dataset(spec);
  for (const auto& s : ds.samples) CHECK(s.label == 0);
}

TEST_CASE("annulus spec validation") {
  auto spec = small_spec(10);
  spec.wall_thickness = {3.0, 20.0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec(10);
  spec.scar_fraction = {0.1, 0.7};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("dataset save/load round trip") {
  test_support::ScratchDir dir("dataio_roundtrip");
  const auto ds = generate_annulus_dataset(small_spec(6));
  save_dataset(ds, dir.path() / "vol", dir.path() / "attrs.csv");
  const auto back = load_dataset(dir.path() / "vol", dir.path() / "attrs.csv");
  REQUIRE(back.size() == ds.size());
  CHECK(back.attribute_names == ds.attribute_names);
  CHECK(back.shape == ds.shape);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].id == ds.samples[i].id);
    CHECK(back.samples[i].attributes == ds.samples[i].attributes);
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].volume == ds.samples[i].volume);
  }
}

TEST_CASE("load_dataset with a hand-written table") {
  test_support::ScratchDir dir("dataio_table");
  const nn::Extent3 shape{2, 2, 1};
  for (const char* id : {"case01", "case02", "case03"})
    write_volume(dir.path() / (std::string(id) + ".f32"), {0.f, 1.f, 2.f, 3.f}, shape);
  {
    std::ofstream t(dir.path() / "t.csv");
    t << "id,zeta,alpha,label\ncase01,1,2,0\ncase02,3,4,1\ncase03,5,6,0\n";
  }
  const auto ds = load_dataset(dir.path(), dir.path() / "t.csv");
  CHECK(ds.size() == 3);
  CHECK(ds.attribute_names == std::vector<std::string>{"zeta", "alpha"});
  CHECK(ds.samples[1].attributes == std::vector<double>{3, 4});

  {
    std::ofstream t(dir.path() / "bad.csv");
    t << "id,zeta,label\ncase01,1,0\ncase09,2,1\n";
  }
  try {
    load_dataset(dir.path(), dir.path() / "bad.csv");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("case09") != std::string::npos);
  }
}

TEST_CASE("preprocess normalization and extent") {
  const nn::Extent3 shape{4, 4, 1};
  std::vector<float> v(16);
  for (int i = 0; i < 16; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i * 17);  // 0..255
  const auto out = preprocess(v, shape, shape);
  for (int i = 0; i < 16; ++i) CHECK(out[static_cast<std::size_t>(i)] == doctest::Approx(i * 17 / 255.0));

  const std::vector<float> constant(16, 3.0f);
  for (float x : preprocess(constant, shape, shape)) CHECK(x == 0.0f);

  const nn::Extent3 cube{80, 80, 80};
  Rng rng(1);
  std::vector<float> vol(cube.count());
  for (auto& x : vol) x = static_cast<float>(rng.uniform(-5, 5));
  CHECK(preprocess(vol, cube, cube).size() == cube.count());

  // Center crop then zero pad.
  const auto cropped = preprocess(v, shape, {2, 6, 1});
  CHECK(cropped.size() == 12);
  CHECK(cropped[0] == 0.0f);
}

TEST_CASE("oversample_minority") {
  const auto ds = labelled(23, 47);
  const auto bal = oversample_minority(ds, 5);
  CHECK(bal.class_counts() == std::array<std::size_t, 2>{47, 47});
  const auto again = oversample_minority(ds, 5);
  for (std::size_t i = 0; i < bal.size(); ++i) CHECK(bal.samples[i].id == again.samples[i].id);
  const auto even = labelled(10, 10);
  CHECK(oversample_minority(even, 1).class_counts() == std::array<std::size_t, 2>{10, 10});
}

TEST_CASE("recursive feature elimination") {
  Rng rng(4);
  Dataset ds;
  ds.shape = {1, 1, 1};
  ds.attribute_names = {"n0", "a0", "n1", "n2"};
  for (int i = 0; i < 200; ++i) {
    Sample s;
    s.id = std::to_string(i);
    s.volume = {0.f};
    s.label = i % 2;
    s.attributes = {rng.normal(), static_cast<double>(s.label), rng.normal(), rng.normal()};
    ds.samples.push_back(s);
  }
  CHECK(rfe_select(ds, 1) == std::vector<std::string>{"a0"});
  const auto all = rfe_select(ds, 4);
  CHECK(std::set<std::string>(all.begin(), all.end()) ==
        std::set<std::string>(ds.attribute_names.begin(), ds.attribute_names.end()));
}
