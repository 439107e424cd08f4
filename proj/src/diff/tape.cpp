#include "sepclr/diff/tape.hpp"

#include <string>
#include <utility>

#include "sepclr/error.hpp"

namespace sepclr::diff {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const Shape& DiffArray::shape() const { return tape_->shape(id_); }
std::size_t DiffArray::size() const { return tape_->value(id_).size(); }

std::size_t DiffArray::rows() const {
  const auto& s = shape();
  return s.empty() ? 1 : s[0];
}

std::size_t DiffArray::cols() const {
  const auto& s = shape();
  return s.size() == 2 ? s[1] : 1;
}

std::span<const double> DiffArray::values() const { return tape_->value(id_); }
std::span<const double> DiffArray::grad() const { return tape_->grad_if_any(id_); }
bool DiffArray::requires_grad() const { return tape_->requires_grad(id_); }

double DiffArray::item() const {
  if (size() != 1) throw ShapeError("item", "array of shape " + format_shape(shape()) + " is not a scalar");
  return values()[0];
}

Matrix DiffArray::to_matrix() const {
  const auto v = values();
  return Matrix(rows(), cols(), std::vector<double>(v.begin(), v.end()));
}

DiffArray Tape::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.size() > 2) throw ShapeError("leaf", "rank above 2 is not supported");
  if (values.size() != shape_size(shape)) {
    throw ShapeError("leaf", "shape " + format_shape(shape) + " holds " +
                                 std::to_string(shape_size(shape)) + " values, got " +
                                 std::to_string(values.size()));
  }
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, requires_grad, {}});
  return DiffArray(this, nodes_.size() - 1);
}

DiffArray Tape::leaf(const Matrix& m, bool requires_grad) {
  return leaf({m.rows(), m.cols()}, m.values(), requires_grad);
}

DiffArray Tape::scalar(double v, bool requires_grad) { return leaf({}, {v}, requires_grad); }

DiffArray Tape::record(Shape shape, std::vector<double> values, std::initializer_list<DiffArray> inputs,
                       BackwardFn backward) {
  return record(std::move(shape), std::move(values), std::span<const DiffArray>(inputs.begin(), inputs.size()),
                std::move(backward));
}

DiffArray Tape::record(Shape shape, std::vector<double> values, std::span<const DiffArray> inputs,
                       BackwardFn backward) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw Error("operands belong to different tapes");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, needs_grad,
                        needs_grad ? std::move(backward) : BackwardFn{}});
  return DiffArray(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(const DiffArray& loss) {
  if (!loss.valid() || &loss.tape() != this) throw Error("backward: loss was not recorded on this tape");
  if (loss.size() != 1) {
    throw ShapeError("backward", "loss must be a scalar, got shape " + format_shape(loss.shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

}  // namespace sepclr::diff
