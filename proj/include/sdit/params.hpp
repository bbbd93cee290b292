#pragma once

#include <string>
#include <vector>

#include "sdit/tensor.hpp"

namespace sdit {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Flat registry of trainable leaves. Registration order is the canonical
// order used by the optimizer, EMA buffers and checkpoints.
class ParamStore {
 public:
  Tensor add(std::string name, Tensor t);
  const std::vector<NamedParam>& items() const { return items_; }
  const Tensor* find(const std::string& name) const;
  std::size_t total_elements() const;
  void zero_grad_all();

 private:
  std::vector<NamedParam> items_;
};

}  // namespace sdit
