#pragma once

#include <cstdint>
#include <vector>

#include "blvt/nn/matrix.hpp"

namespace blvt::nn {

// Append-only reverse-mode tape over whole matrices. Nodes are created in
// topological order by construction; backward() sweeps them once in reverse.
// Tensor granularity keeps the node count per training batch in the low
// thousands instead of tens of millions of scalar nodes.
class Tape {
 public:
  using Id = std::int32_t;

  enum class Op : std::uint8_t {
    Const, Param, Add, Sub, Mul, Div, MatMul, AddRow, Sigmoid, Tanh, Exp, Log,
    Sqrt, Relu, Neg, Scale, Shift, Pow, Sum, Mean, SliceRows, SliceCols, SelectPos,
  };

  Id constant(Matrix v);
  Id param(Matrix v);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id divide(Id a, Id b);
  Id matmul(Id a, Id b);
  // a: (N,C), row: (1,C) broadcast over rows
  Id add_row(Id a, Id row);
  Id sigmoid(Id a);
  Id tanh(Id a);
  Id exp(Id a);
  Id log(Id a);
  Id sqrt(Id a);
  Id relu(Id a);
  Id neg(Id a);
  Id scale(Id a, double k);
  Id shift(Id a, double k);
  Id pow(Id a, double k);
  Id sum(Id a);   // 1x1
  Id mean(Id a);  // 1x1
  Id slice_rows(Id a, std::size_t r0, std::size_t r1);
  Id slice_cols(Id a, std::size_t c0, std::size_t c1);
  // Elementwise: cond > 0 picks from a, else from b. No gradient through
  // cond (forward-pass branch fixing; subgradient at the switch).
  Id select_pos(Id cond, Id a, Id b);

  const Matrix& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].val; }

  // Seeds the 1x1 loss with adjoint 1 and accumulates adjoints for every
  // node. Callable once per tape content; reset() before reuse.
  void backward(Id loss);

  // Adjoint of a node after backward(); zero matrix when the node was not
  // reached.
  const Matrix& grad(Id id) const;

  void reset();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    Id a = -1;
    Id b = -1;
    Id c = -1;
    double k = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    Matrix val;
    Matrix adj;
  };

  Id push(Node n);
  Node& at(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Matrix& adj_of(Node& n);

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace blvt::nn
