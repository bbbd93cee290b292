#include "sdit/params.hpp"

#include <stdexcept>

namespace sdit {

Tensor ParamStore::add(std::string name, Tensor t) {
  if (find(name)) throw std::logic_error("param registered twice: " + name);
  t.set_requires_grad(true);
  items_.push_back({std::move(name), t});
  return t;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& it : items_)
    if (it.name == name) return &it.tensor;
  return nullptr;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& it : items_) n += static_cast<std::size_t>(it.tensor.numel());
  return n;
}

void ParamStore::zero_grad_all() {
  for (auto& it : items_) const_cast<Tensor&>(it.tensor).zero_grad();
}

}  // namespace sdit
