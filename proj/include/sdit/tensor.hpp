#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sdit {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense double tensor with a define-by-run reverse-mode tape. Each op creates
// a node holding its parents and a backward closure; nodes carry a global
// creation id, so ascending id is a valid topological order.
class Tensor {
 public:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily; empty means "all zero"
    std::vector<std::shared_ptr<Impl>> parents;
    std::function<void(Impl&)> backprop;  // reads this->grad, accumulates into parents
    const char* op = "leaf";
    std::uint64_t id = 0;
    bool requires_grad = false;

    void ensure_grad();
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  static Tensor from(std::vector<double> values, Shape shape);
  static Tensor randn(Shape shape, std::mt19937_64& rng);
  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const;
  std::int64_t dim(int i) const;
  int rank() const;

  std::span<const double> values() const;
  std::span<double> values_mut();  // leaf buffers only (params, inputs)
  double item() const;             // single-element tensors
  double at(std::int64_t i) const;
  bool all_finite() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  std::span<const double> grad() const;  // empty span when untouched
  void zero_grad();                      // sizes and clears the grad buffer

  const char* op() const;
  std::uint64_t node_id() const;
  bool is_leaf() const;

  const std::shared_ptr<Impl>& impl() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// Ordered record of the nodes reachable from a root, ascending creation id
// (inputs before outputs).
struct Graph {
  std::vector<Tensor::Impl*> nodes;
  static Graph trace(const Tensor& root);
};

enum class GradMode {
  Reset,       // zero every reachable grad before the sweep
  Accumulate,  // keep leaf grads, zero only interior nodes
};

// Reverse-mode sweep from a scalar loss. Leaves not reachable from the loss
// keep whatever grad they had (zero after zero_grad), they are not an error.
void backward(const Tensor& loss, GradMode mode = GradMode::Reset);

bool grad_enabled();

// Disables tape recording in scope (sampling / evaluation paths).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {
// Shared by ops.cpp: wraps values into a node, wiring parents + backprop only
// while recording is on and some parent requires grad.
Tensor make_node(const char* op, std::span<const Tensor> parents,
                 std::vector<double> values, Shape shape,
                 std::function<void(Tensor::Impl&)> backprop);
[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b);
}  // namespace detail

}  // namespace sdit
