#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sdit/dataset.hpp"

using namespace sdit;

TEST_CASE("generation is deterministic per seed and varies across seeds") {
  for (const std::string kind : {"blobs", "rings", "shapes3"}) {
    auto a = gen_dataset(kind, 12, 7);
    auto b = gen_dataset(kind, 12, 7);
    auto c = gen_dataset(kind, 12, 8);
    REQUIRE(a.images.size() == 12);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    CHECK(a.images != c.images);
  }
}

TEST_CASE("images are 16x16 in [-1, 1] and not constant") {
  for (const std::string kind : {"blobs", "rings", "shapes3"}) {
    auto d = gen_dataset(kind, 24, 3);
    CHECK(d.image == 16);
    for (const auto& img : d.images) {
      REQUIRE(img.size() == 256);
      auto [lo, hi] = std::minmax_element(img.begin(), img.end());
      CHECK(*lo >= -1.0);
      CHECK(*hi <= 1.0);
      CHECK(*hi - *lo > 0.1);
    }
  }
}

TEST_CASE("class structure: shapes3 labeled and roughly balanced") {
  auto d = gen_dataset("shapes3", 90, 5);
  CHECK(d.classes == 3);
  REQUIRE(d.labels.size() == 90);
  std::vector<int> counts(3, 0);
  for (int l : d.labels) {
    REQUIRE(l >= 0);
    REQUIRE(l < 3);
    counts[l]++;
  }
  for (int c : counts) CHECK(c == 30);

  auto blobs = gen_dataset("blobs", 10, 1);
  CHECK(blobs.classes == 0);
  CHECK(blobs.labels.empty());
}

TEST_CASE("dataset_class_count matches the generators") {
  CHECK(dataset_class_count("blobs") == 0);
  CHECK(dataset_class_count("rings") == 0);
  CHECK(dataset_class_count("shapes3") == 3);
  CHECK_THROWS(dataset_class_count("mnist"));
  CHECK_THROWS(gen_dataset("mnist", 4, 1));
}

TEST_CASE("the three corpora are visually distinct in mean intensity profile") {
  auto blobs = gen_dataset("blobs", 64, 11);
  auto rings = gen_dataset("rings", 64, 11);
  auto mean_img = [](const Dataset& d) {
    std::vector<double> m(256, 0.0);
    for (const auto& img : d.images)
      for (int i = 0; i < 256; ++i) m[i] += img[i] / d.images.size();
    return m;
  };
  auto mb = mean_img(blobs), mr = mean_img(rings);
  double diff = 0.0;
  for (int i = 0; i < 256; ++i) diff += std::fabs(mb[i] - mr[i]);
  CHECK(diff > 1.0);
}

TEST_CASE("flip_horizontal mirrors columns and is an involution") {
  std::vector<double> img(16);
  for (int i = 0; i < 16; ++i) img[i] = i;
  auto f = flip_horizontal(img, 4);
  CHECK(f[0] == 3.0);
  CHECK(f[3] == 0.0);
  CHECK(f[4] == 7.0);
  CHECK(flip_horizontal(f, 4) == img);
}
