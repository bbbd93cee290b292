#include "sdit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sdit {

namespace {
constexpr int kSize = 16;

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

std::vector<double> render(const std::function<double(double, double)>& intensity) {
  std::vector<double> img(kSize * kSize);
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x)
      img[y * kSize + x] = clamp1(-1.0 + 2.0 * intensity(x, y));
  return img;
}

double soft_edge(double signed_dist, double softness = 0.5) {
  return 1.0 / (1.0 + std::exp(signed_dist / softness));
}
}  // namespace

Dataset gen_dataset(const std::string& kind, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("gen_dataset: count must be >= 1");
  Dataset ds;
  ds.kind = kind;
  ds.image = kSize;
  std::mt19937_64 rng(seed);

  if (kind == "blobs") {
    // single gaussian bump on a 3x3 grid of centers, amplitude jitter
    std::uniform_int_distribution<int> cell(0, 2);
    std::uniform_real_distribution<double> amp(0.85, 1.0);
    const double sigma = 1.8;
    for (int i = 0; i < count; ++i) {
      const double cx = 4.5 + 3.0 * cell(rng);
      const double cy = 4.5 + 3.0 * cell(rng);
      const double a = amp(rng);
      ds.images.push_back(render([&](double x, double y) {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        return a * std::exp(-r2 / (2.0 * sigma * sigma));
      }));
    }
  } else if (kind == "rings") {
    std::uniform_int_distribution<int> rad(3, 5);
    std::uniform_int_distribution<int> jit(-1, 1);
    const double w = 0.8;
    for (int i = 0; i < count; ++i) {
      const double r = rad(rng);
      const double cx = 7.5 + jit(rng);
      const double cy = 7.5 + jit(rng);
      ds.images.push_back(render([&](double x, double y) {
        const double d = std::hypot(x - cx, y - cy);
        return std::exp(-(d - r) * (d - r) / (2.0 * w * w));
      }));
    }
  } else if (kind == "shapes3") {
    ds.classes = 3;
    std::uniform_int_distribution<int> jit(-1, 1);
    for (int i = 0; i < count; ++i) {
      const int label = i % 3;  // balanced round-robin
      const double cx = 7.5 + jit(rng);
      const double cy = 7.5 + jit(rng);
      ds.labels.push_back(label);
      ds.images.push_back(render([&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        switch (label) {
          case 0:  // disc
            return soft_edge(std::hypot(dx, dy) - 4.5);
          case 1:  // square
            return soft_edge(std::max(std::fabs(dx), std::fabs(dy)) - 5.0);
          default:  // cross of two bars
            return soft_edge(std::min(std::fabs(dx), std::fabs(dy)) - 2.0);
        }
      }));
    }
  } else {
    throw std::invalid_argument("gen_dataset: unknown kind '" + kind + "'");
  }
  return ds;
}

int dataset_class_count(const std::string& kind) {
  if (kind == "blobs" || kind == "rings") return 0;
  if (kind == "shapes3") return 3;
  throw std::invalid_argument("dataset_class_count: unknown kind '" + kind + "'");
}

std::vector<double> flip_horizontal(const std::vector<double>& img, int size) {
  if (static_cast<int>(img.size()) != size * size)
    throw std::invalid_argument("flip_horizontal: size mismatch");
  std::vector<double> out(img.size());
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out[y * size + x] = img[y * size + (size - 1 - x)];
  return out;
}

}  // namespace sdit
