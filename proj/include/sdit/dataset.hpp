#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdit {

// Synthetic 16x16 grayscale corpora in [-1, 1]. "blobs" and "rings" are
// unlabeled; "shapes3" carries 3 balanced class labels (disc, square, cross).
struct Dataset {
  std::string kind;
  int image = 16;
  int classes = 0;
  std::vector<std::vector<double>> images;
  std::vector<int> labels;  // empty when classes == 0
};

Dataset gen_dataset(const std::string& kind, int count, std::uint64_t seed);

// 0 for the unlabeled corpora, 3 for shapes3; throws on unknown kind.
int dataset_class_count(const std::string& kind);

std::vector<double> flip_horizontal(const std::vector<double>& img, int size);

}  // namespace sdit
