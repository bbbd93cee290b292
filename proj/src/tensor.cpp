#include "sdit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace sdit {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
thread_local int g_no_grad_depth = 0;

std::shared_ptr<Tensor::Impl> new_impl(Shape shape, std::vector<double> values) {
  auto impl = std::make_shared<Tensor::Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}
}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

void Tensor::Impl::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double v) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tensor Tensor::from(std::vector<double> values, Shape shape) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
    throw std::invalid_argument("from: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  return Tensor(new_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng) {
  auto n = shape_numel(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(new_impl(std::move(shape), std::move(v)));
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  auto n = shape_numel(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(new_impl(std::move(shape), std::move(v)));
}

static const Tensor::Impl& deref(const std::shared_ptr<Tensor::Impl>& p) {
  if (!p) throw std::logic_error("use of undefined tensor");
  return *p;
}

const Shape& Tensor::shape() const { return deref(impl_).shape; }

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(deref(impl_).values.size());
}

std::int64_t Tensor::dim(int i) const {
  const auto& s = shape();
  int r = static_cast<int>(s.size());
  if (i < 0) i += r;
  if (i < 0 || i >= r)
    throw std::invalid_argument("dim index " + std::to_string(i) + " out of rank " +
                                std::to_string(r));
  return s[i];
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::span<const double> Tensor::values() const {
  const auto& im = deref(impl_);
  return {im.values.data(), im.values.size()};
}

std::span<double> Tensor::values_mut() {
  auto& im = const_cast<Tensor::Impl&>(deref(impl_));
  return {im.values.data(), im.values.size()};
}

double Tensor::item() const {
  const auto& im = deref(impl_);
  if (im.values.size() != 1)
    throw std::invalid_argument("item: tensor has shape " + shape_str(im.shape));
  return im.values[0];
}

double Tensor::at(std::int64_t i) const {
  const auto& im = deref(impl_);
  if (i < 0 || i >= static_cast<std::int64_t>(im.values.size()))
    throw std::out_of_range("at: index " + std::to_string(i) + " for " +
                            shape_str(im.shape));
  return im.values[static_cast<std::size_t>(i)];
}

bool Tensor::all_finite() const {
  for (double v : values())
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::requires_grad() const { return deref(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  auto& im = const_cast<Tensor::Impl&>(deref(impl_));
  if (on && !im.parents.empty())
    throw std::logic_error("set_requires_grad: only leaf tensors");
  im.requires_grad = on;
  return *this;
}

std::span<const double> Tensor::grad() const {
  const auto& im = deref(impl_);
  return {im.grad.data(), im.grad.size()};
}

void Tensor::zero_grad() {
  auto& im = const_cast<Tensor::Impl&>(deref(impl_));
  im.grad.assign(im.values.size(), 0.0);
}

const char* Tensor::op() const { return deref(impl_).op; }

std::uint64_t Tensor::node_id() const { return deref(impl_).id; }

bool Tensor::is_leaf() const { return deref(impl_).parents.empty(); }

Graph Graph::trace(const Tensor& root) {
  Graph g;
  if (!root.defined()) return g;
  std::unordered_set<const Tensor::Impl*> seen;
  std::vector<Tensor::Impl*> stack{root.impl().get()};
  seen.insert(root.impl().get());
  while (!stack.empty()) {
    Tensor::Impl* node = stack.back();
    stack.pop_back();
    g.nodes.push_back(node);
    for (const auto& p : node->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const Tensor::Impl* a, const Tensor::Impl* b) { return a->id < b->id; });
  return g;
}

void backward(const Tensor& loss, GradMode mode) {
  if (!loss.defined()) throw std::logic_error("backward: undefined tensor");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  Graph g = Graph::trace(loss);
  for (Tensor::Impl* node : g.nodes) {
    if (mode == GradMode::Reset || !node->parents.empty())
      node->grad.assign(node->values.size(), 0.0);
    else
      node->ensure_grad();
  }
  loss.impl()->grad.assign(1, 1.0);
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    Tensor::Impl* node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

namespace detail {

Tensor make_node(const char* op, std::span<const Tensor> parents,
                 std::vector<double> values, Shape shape,
                 std::function<void(Tensor::Impl&)> backprop) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
    throw std::logic_error(std::string(op) + ": value count mismatch for " +
                           shape_str(shape));
  auto impl = new_impl(std::move(shape), std::move(values));
  impl->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p.defined() && p.requires_grad()) {
        track = true;
        break;
      }
  }
  if (track) {
    impl->requires_grad = true;
    impl->parents.reserve(parents.size());
    for (const auto& p : parents) impl->parents.push_back(p.impl());
    impl->backprop = std::move(backprop);
  }
  return Tensor(std::move(impl));
}

void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a) + " and " + shape_str(b));
}

}  // namespace detail

}  // namespace sdit
