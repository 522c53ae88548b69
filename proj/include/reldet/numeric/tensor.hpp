#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reldet::numeric {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Dense row-major array of doubles. Copies share storage; `mutable_data()`
// detaches. A tensor produced on a Tape carries the tape pointer and the node
// id its gradient is accumulated into; everything else is a constant.
class Tensor {
 public:
  Tensor();  // scalar 0
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_->size(); }

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  /// Detaches from any tape and from shared storage before handing out a view.
  std::span<double> mutable_data();

  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return tape_ != nullptr; }
  std::optional<std::size_t> node_id() const;
  Tape* tape() const { return tape_; }

  /// Same values, no tape.
  Tensor detach() const;

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<std::vector<double>> data, Tape* tape, std::size_t node);

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

// Define-by-run gradient tape. Nodes are appended in evaluation order, so
// every node's inputs precede it; backward walks the nodes in exact reverse.
// A tape and the tensors recorded on it belong to one thread.
class Tape {
 public:
  /// Receives the gradient of the node's output and accumulates into inputs.
  using Backward = std::function<void(const double* out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is wanted. Values are shared with `value`.
  Tensor watch(const Tensor& value);
  Tensor record(Shape shape, std::vector<double> values, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws ContractError unless
  /// `loss` is a scalar recorded on this tape.
  void backward(const Tensor& loss);

  /// Gradient accumulated for `t`; zeros if nothing reached it.
  Tensor grad(const Tensor& t) const;

  /// Gradient accumulator for node `id`, allocated (zeroed) on first use.
  double* grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace reldet::numeric
