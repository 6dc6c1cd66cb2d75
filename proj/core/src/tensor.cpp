#include "leafkit/tensor.h"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "leafkit/error.h"

namespace leafkit {

namespace {

thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one dimension");
  for (std::size_t d : shape) {
    // Negative sizes wrap to huge values through size_t conversion.
    if (d == 0 || d > (std::size_t{1} << 40)) {
      throw ShapeError("invalid dimension in shape " + shape_to_string(shape));
    }
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kLinear: return "linear";
    case OpKind::kConcat: return "concat";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConv2D: return "conv2d";
    case OpKind::kMaxPool2D: return "maxpool2d";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kSequenceReshape: return "sequence_reshape";
    case OpKind::kSequenceUnreshape: return "sequence_unreshape";
    case OpKind::kTimeStep: return "time_step";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

float* TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad.data();
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0f); }

Tensor Tensor::ones(const Shape& shape) { return full(shape, 1.0f); }

Tensor Tensor::full(const Shape& shape, float value) {
  validate_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data.assign(shape_numel(shape), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(const Shape& shape, std::vector<float> values) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("buffer of " + std::to_string(values.size()) + " elements does not fit shape " +
                     shape_to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) throw ShapeError("axis out of range");
  return impl_->shape[axis];
}

std::size_t Tensor::rank() const { return impl_->shape.size(); }

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<float> Tensor::data() { return impl_->data; }

std::span<const float> Tensor::data() const { return impl_->data; }

std::vector<float> Tensor::to_vector() const { return impl_->data; }

float Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const { return impl_->grad; }

std::span<float> Tensor::mutable_grad() {
  impl_->grad_buffer();
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

const TapeNode* Tensor::node() const { return impl_->node.get(); }

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::make_result(Shape shape, std::vector<float> data, OpKind kind, std::vector<Tensor> inputs,
                           std::function<void(const TensorImpl&)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (g_grad_enabled && any) {
    impl->requires_grad = true;
    impl->node = std::make_shared<TapeNode>(TapeNode{kind, std::move(inputs), std::move(backward)});
  }
  return Tensor(std::move(impl));
}

void Tensor::backward() const {
  if (!impl_) throw ContractError("backward() on undefined tensor");
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar, got shape " + shape_to_string(shape()));
  }
  if (!impl_->requires_grad) return;

  // Post-order DFS gives a topological order with inputs before consumers.
  std::vector<TensorImpl*> order;
  std::unordered_map<TensorImpl*, int> consumers;
  {
    std::unordered_map<TensorImpl*, bool> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited[impl_.get()] = true;
    while (!stack.empty()) {
      auto& [t, next] = stack.back();
      const TapeNode* node = t->node.get();
      if (node && next < node->inputs.size()) {
        TensorImpl* child = node->inputs[next++].impl();
        if (!child->requires_grad) continue;
        ++consumers[child];
        if (!visited[child]) {
          visited[child] = true;
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(t);
        stack.pop_back();
      }
    }
  }

  // Interior gradients describe this pass only; leaves keep accumulating.
  for (TensorImpl* t : order) {
    if (t->node && !t->grad.empty()) std::fill(t->grad.begin(), t->grad.end(), 0.0f);
  }
  impl_->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    assert(consumers[t] == 0 && "gradient read before every consumer wrote it");
    if (!t->node) continue;
    t->grad_buffer();
    t->node->backward(*t);
    for (const auto& in : t->node->inputs) {
      if (in.requires_grad()) --consumers[in.impl()];
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace leafkit
