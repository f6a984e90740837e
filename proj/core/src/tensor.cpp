#include "fdcnet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace fdcnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::span<double> TensorNode::grad_buffer() {
  if (!requires_grad) return {};
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

void check_shape(const Shape& shape, std::size_t n) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != n)
    throw ShapeError("shape " + shape_str(shape) + " does not hold " + std::to_string(n) +
                     " values");
}

void check_finite(const char* what, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NonFiniteError(std::string("non-finite value in ") + what + " at flat index " +
                           std::to_string(i));
}

}  // namespace

Tensor::Tensor() : Tensor(Shape{1}, {0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  check_shape(shape, data.size());
  check_finite("tensor construction", data);
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= ndim())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != ndim()) throw ShapeError("index rank mismatch for " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= node_->shape[axis]) throw ShapeError("index out of range for " + shape_str(shape()));
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

Tensor Tensor::clone(bool requires_grad) const {
  Tensor t(node_->shape, node_->data, requires_grad);
  t.node_->name = node_->name;
  return t;
}

GradTape& GradTape::active() {
  thread_local GradTape tape;
  return tape;
}

Tensor record_op(const char* op, Shape shape, std::vector<double> values,
                 const std::vector<const Tensor*>& inputs,
                 std::function<void(std::span<const double>)> backward_fn) {
  check_shape(shape, values.size());
  check_finite(op, values);
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->leaf = false;

  auto& tape = GradTape::active();
  bool needs = false;
  if (tape.enabled())
    for (const auto* in : inputs) needs = needs || in->requires_grad();
  if (needs) {
    node->requires_grad = true;
    GradTape::Node rec{op, node, {}, std::move(backward_fn)};
    rec.inputs.reserve(inputs.size());
    for (const auto* in : inputs) rec.inputs.push_back(in->node());
    tape.push(std::move(rec));
  }
  return Tensor(std::move(node));
}

std::span<double> grad_sink(const Tensor& t) { return t.node()->grad_buffer(); }

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  auto& tape = GradTape::active();
  if (!loss.requires_grad()) {
    tape.clear();
    throw ContractError("backward() on a loss that is not on the active tape");
  }
  auto seed = grad_sink(loss);
  seed[0] += 1.0;
  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(it->output->grad);
  }
  // Intermediate gradients are no longer needed; leaves keep theirs.
  for (const auto& n : nodes) n.output->grad.clear();
  tape.clear();
}

}  // namespace fdcnet
