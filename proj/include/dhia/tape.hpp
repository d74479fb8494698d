#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "dhia/matrix.hpp"

namespace dhia {

// Trainable tensors of one network plus their adaptive-moment accumulators.
struct ParamStore {
  std::vector<Matrix> values;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;

  void add(Matrix value);
  std::size_t tensor_count() const noexcept { return values.size(); }
  std::size_t scalar_count() const noexcept;
  // Clears accumulators and the step counter, keeping values.
  void reset_optimizer_state();
};

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape;
using BackwardFn = std::function<void(Tape&, std::size_t self)>;

// Gradients produced by a backward pass, keyed by the stores that appeared on the tape.
class Gradients {
 public:
  // One gradient per tensor of `store`; zeros for a store never used on the tape.
  std::vector<Matrix> of(const ParamStore& store) const;
  bool touched(const ParamStore& store) const { return by_store_.count(&store) != 0; }

 private:
  friend class Tape;
  std::map<const ParamStore*, std::vector<Matrix>> by_store_;
};

// Records primitive operations for reverse-mode differentiation.
// Single-threaded; a Tape is used for exactly one forward/backward pass.
class Tape {
 public:
  Var constant(Matrix value);
  // Leaf bound to store.values[index]. Repeated requests return the same node.
  Var parameter(const ParamStore& store, std::size_t index);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // `loss` must be a 1x1 node and the last node recorded.
  Gradients backward(Var loss);

  // Used by the operation implementations.
  Var record(Matrix value, BackwardFn fn);
  Matrix& grad(std::size_t id);
  const Matrix& value_at(std::size_t id) const { return nodes_[id].value; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    const ParamStore* store = nullptr;
    std::size_t tensor = 0;
  };
  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::size_t> param_nodes_;
};

// Row reference into one of several source nodes.
struct RowRef {
  std::size_t source = 0;
  std::size_t row = 0;
};

// Differentiable primitives. Every op checks shapes and throws DimensionError.
Var matmul(Tape& t, Var a, Var b);
Var matmul_nt(Tape& t, Var a, Var b);         // a * b^T
Var add_row_bias(Tape& t, Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var sub_scalar(Tape& t, Var a, Var s);  // s is 1x1, subtracted from every entry
Var hadamard(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var relu(Tape& t, Var a);
Var softplus(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a);
Var log_softmax_rows(Tape& t, Var a);
Var abs(Tape& t, Var a);
Var square(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);
Var col_mean(Tape& t, Var a);
Var diag(Tape& t, Var a);                                   // n x n -> n x 1
Var row_scale(Tape& t, Var a, std::span<const double> w);  // row i multiplied by w[i]
Var select_rows(Tape& t, std::span<const Var> sources, std::span<const RowRef> picks);
// Row g of the result is the mean of a's rows listed in groups[g] (sum, then divide).
Var group_mean_rows(Tape& t, Var a, const std::vector<std::vector<std::size_t>>& groups);
// x * log(max(x, floor)) elementwise, with 0 * log 0 := 0.
Var xlogx(Tape& t, Var a, double floor = 1e-12);

}  // namespace dhia
