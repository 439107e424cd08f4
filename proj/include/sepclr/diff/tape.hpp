#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sepclr/matrix.hpp"

namespace sepclr::diff {

using Shape = std::vector<std::size_t>;

class Tape;

/// Handle to a dense float64 array recorded on a Tape.
///
/// Rank 0 is a scalar, rank 1 a vector, rank 2 a row-major matrix. The
/// handle is cheap to copy; the storage belongs to the tape, so a DiffArray
/// must not outlive the tape that created it.
class DiffArray {
 public:
  DiffArray() = default;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  /// Leading dimension (1 for scalars).
  std::size_t rows() const;
  /// Trailing dimension of a matrix (1 for scalars and vectors).
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Empty until backward() reaches this array.
  std::span<const double> grad() const;
  bool requires_grad() const;
  /// Value of a single-element array.
  double item() const;
  Matrix to_matrix() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  DiffArray(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of executed primitives. backward() walks it in exact
/// reverse of execution order. One tape per forward pass; a tape is
/// confined to the thread that builds it.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DiffArray leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
  DiffArray leaf(const Matrix& m, bool requires_grad = false);
  DiffArray scalar(double v, bool requires_grad = false);

  /// Records an operation result. The backward function is kept only when
  /// some input requires a gradient.
  DiffArray record(Shape shape, std::vector<double> values, std::initializer_list<DiffArray> inputs,
                   BackwardFn backward);
  DiffArray record(Shape shape, std::vector<double> values, std::span<const DiffArray> inputs,
                   BackwardFn backward);

  /// Populates d(loss)/d(array) for every array that requires a gradient.
  void backward(const DiffArray& loss);

  std::size_t size() const { return nodes_.size(); }

  // Accessors used by primitive backward rules.
  const std::vector<double>& value(std::size_t id) const { return nodes_[id].value; }
  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer, zero-allocated on first access.
  std::vector<double>& grad(std::size_t id);
  const std::vector<double>& grad_if_any(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

std::size_t shape_size(const Shape& shape);

}  // namespace sepclr::diff
