#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fdcnet/errors.hpp"

namespace fdcnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, only when requires_grad
  bool requires_grad = false;
  bool leaf = true;
  std::string name;

  std::span<double> grad_buffer();
};

}  // namespace detail

// Dense row-major f64 array. Copies share storage (handle semantics); use
// clone() for a deep copy. Values are checked finite on construction.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::initializer_list<std::size_t> index) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  // Whole-tensor in-place access for optimizer updates and initialisation.
  // Must not be used on tensors that are inputs of a recorded op.
  std::span<double> mutable_data() { return node_->data; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }

  // New leaf with copied values; never requires grad.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor record_op(const char*, Shape, std::vector<double>, const std::vector<const Tensor*>&,
                          std::function<void(std::span<const double>)>);
};

// Gradient tape: ops append nodes in execution order; backward() walks them in
// reverse and then clears the tape. One tape per thread.
class GradTape {
 public:
  struct Node {
    const char* op;
    std::shared_ptr<detail::TensorNode> output;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::function<void(std::span<const double>)> backward;
  };

  static GradTape& active();

  void push(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }

 private:
  std::vector<Node> nodes_;
  bool enabled_ = true;
};

// Disables recording for its lifetime (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradTape::active().enabled()) { GradTape::active().set_enabled(false); }
  ~NoGradGuard() { GradTape::active().set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds an op result. Throws NonFiniteError naming `op` if any value is not
// finite. When recording is on and an input requires grad, the result
// requires grad and `backward` is appended to the tape; it receives the
// result's gradient and accumulates into inputs via grad_sink().
Tensor record_op(const char* op, Shape shape, std::vector<double> values,
                 const std::vector<const Tensor*>& inputs,
                 std::function<void(std::span<const double>)> backward);

// Gradient accumulator of `t`, or an empty span when t needs no gradient.
std::span<double> grad_sink(const Tensor& t);

// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. Clears the tape.
void backward(const Tensor& loss);

}  // namespace fdcnet
