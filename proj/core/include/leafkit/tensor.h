#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace leafkit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Differentiable operations recorded on the tape.
enum class OpKind {
  kAdd,
  kSub,
  kMul,
  kSigmoid,
  kTanh,
  kRelu,
  kSum,
  kMean,
  kMatmul,
  kLinear,
  kConcat,
  kReshape,
  kConv2D,
  kMaxPool2D,
  kGlobalAvgPool,
  kSequenceReshape,
  kSequenceUnreshape,
  kTimeStep,
  kSoftmaxCrossEntropy,
};

const char* op_name(OpKind kind);

class Tensor;
struct TensorImpl;

// One recorded operation. `backward` reads the output gradient and adds its
// contribution into the gradient buffers of `inputs`.
struct TapeNode {
  OpKind kind;
  std::vector<Tensor> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<TapeNode> node;  // null for leaves

  float* grad_buffer();  // allocates zero-filled on first use
};

// Shared handle to a dense row-major f32 array. Copies alias the same storage;
// use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, float value);
  static Tensor from(const Shape& shape, std::vector<float> values);
  static Tensor scalar(float value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const;
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  std::vector<float> to_vector() const;
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  bool is_leaf() const;
  const TapeNode* node() const;

  // Deep copy of data only; the result is a leaf without gradient history.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  // Reverse-mode sweep from this scalar. Gradients accumulate into every
  // tensor of the graph that requires grad; calling twice accumulates twice.
  void backward() const;

  TensorImpl* impl() const { return impl_.get(); }

  static Tensor make_result(Shape shape, std::vector<float> data, OpKind kind,
                            std::vector<Tensor> inputs,
                            std::function<void(const TensorImpl&)> backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Gradient recording is on by default, per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace leafkit
