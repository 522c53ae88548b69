#include "reldet/numeric/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "reldet/errors.hpp"

namespace reldet::numeric {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor() : data_(std::make_shared<std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(std::move(data))) {
  if (shape_numel(shape_) != data_->size())
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not hold " +
                         std::to_string(data_->size()) + " values");
}

Tensor::Tensor(Shape shape, std::shared_ptr<std::vector<double>> data, Tape* tape,
               std::size_t node)
    : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  return shape_[axis];
}

std::span<double> Tensor::mutable_data() {
  if (tape_ || data_.use_count() > 1) {
    data_ = std::make_shared<std::vector<double>>(*data_);
    tape_ = nullptr;
  }
  return {data_->data(), data_->size()};
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (shape_.size() != 2 || row >= shape_[0] || col >= shape_[1])
    throw DimensionError("index (" + std::to_string(row) + "," + std::to_string(col) +
                         ") invalid for " + shape_str(shape_));
  return (*data_)[row * shape_[1] + col];
}

double Tensor::item() const {
  if (data_->size() != 1)
    throw DimensionError("item() on non-scalar tensor " + shape_str(shape_));
  return (*data_)[0];
}

std::optional<std::size_t> Tensor::node_id() const {
  if (!tape_) return std::nullopt;
  return node_;
}

Tensor Tensor::detach() const { return Tensor(shape_, data_, nullptr, 0); }

Tensor Tape::watch(const Tensor& value) {
  nodes_.push_back(Node{value.shape(), {}, nullptr});
  return Tensor(value.shape(), value.data_, this, nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> values, Backward backward) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("recorded value count does not match " + shape_str(shape));
  nodes_.push_back(Node{shape, {}, std::move(backward)});
  return Tensor(std::move(shape), std::make_shared<std::vector<double>>(std::move(values)), this,
                nodes_.size() - 1);
}

double* Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad.assign(shape_numel(node.shape), 0.0);
  return node.grad.data();
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw ContractError("backward: loss is not recorded on this tape");
  if (loss.numel() != 1)
    throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  grad_buffer(loss.node_)[0] += 1.0;
  for (std::size_t i = loss.node_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node.grad.data(), *this);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (t.tape() != this) return Tensor::zeros(t.shape());
  const Node& node = nodes_.at(t.node_);
  if (node.grad.empty()) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), node.grad);
}

}  // namespace reldet::numeric
