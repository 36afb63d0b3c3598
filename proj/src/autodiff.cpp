#include "blvt/nn/autodiff.hpp"

#include <cmath>
#include <string>

#include "blvt/errors.hpp"

namespace blvt::nn {

namespace {

void require_same_shape(const Matrix& x, const Matrix& y, const char* who) {
  if (!x.same_shape(y)) throw ShapeError(std::string(who) + ": shape mismatch");
}

}  // namespace

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(Matrix v) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(v);
  return push(std::move(n));
}

Tape::Id Tape::param(Matrix v) {
  Node n;
  n.op = Op::Param;
  n.val = std::move(v);
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_same_shape(x, y, "add");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.val = x;
  for (std::size_t i = 0; i < y.size(); ++i) n.val.data[i] += y.data[i];
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_same_shape(x, y, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.val = x;
  for (std::size_t i = 0; i < y.size(); ++i) n.val.data[i] -= y.data[i];
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_same_shape(x, y, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.val = x;
  for (std::size_t i = 0; i < y.size(); ++i) n.val.data[i] *= y.data[i];
  return push(std::move(n));
}

Tape::Id Tape::divide(Id a, Id b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_same_shape(x, y, "divide");
  Node n;
  n.op = Op::Div;
  n.a = a;
  n.b = b;
  n.val = x;
  for (std::size_t i = 0; i < y.size(); ++i) n.val.data[i] /= y.data[i];
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.val = nn::matmul(value(a), value(b));
  return push(std::move(n));
}

Tape::Id Tape::add_row(Id a, Id row) {
  const auto& x = value(a);
  const auto& r = value(row);
  if (r.rows != 1 || r.cols != x.cols) throw ShapeError("add_row: row must be 1 x cols");
  Node n;
  n.op = Op::AddRow;
  n.a = a;
  n.b = row;
  n.val = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) n.val(i, j) += r.data[j];
  return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = std::tanh(v);
  return push(std::move(n));
}

Tape::Id Tape::exp(Id a) {
  Node n;
  n.op = Op::Exp;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = std::exp(v);
  return push(std::move(n));
}

Tape::Id Tape::log(Id a) {
  Node n;
  n.op = Op::Log;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = std::log(v);
  return push(std::move(n));
}

Tape::Id Tape::sqrt(Id a) {
  Node n;
  n.op = Op::Sqrt;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = std::sqrt(v);
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Tape::Id Tape::neg(Id a) {
  Node n;
  n.op = Op::Neg;
  n.a = a;
  n.val = value(a);
  for (double& v : n.val.data) v = -v;
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double k) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.k = k;
  n.val = value(a);
  for (double& v : n.val.data) v *= k;
  return push(std::move(n));
}

Tape::Id Tape::shift(Id a, double k) {
  Node n;
  n.op = Op::Shift;
  n.a = a;
  n.k = k;
  n.val = value(a);
  for (double& v : n.val.data) v += k;
  return push(std::move(n));
}

Tape::Id Tape::pow(Id a, double k) {
  Node n;
  n.op = Op::Pow;
  n.a = a;
  n.k = k;
  n.val = value(a);
  for (double& v : n.val.data) v = std::pow(v, k);
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.val = Matrix(1, 1, 0.0);
  for (double v : value(a).data) n.val.data[0] += v;
  return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
  const auto& x = value(a);
  if (x.empty()) throw ShapeError("mean: empty input");
  Node n;
  n.op = Op::Mean;
  n.a = a;
  n.val = Matrix(1, 1, 0.0);
  for (double v : x.data) n.val.data[0] += v;
  n.val.data[0] /= static_cast<double>(x.size());
  return push(std::move(n));
}

Tape::Id Tape::slice_rows(Id a, std::size_t r0, std::size_t r1) {
  const auto& x = value(a);
  if (!(r0 < r1 && r1 <= x.rows)) throw ShapeError("slice_rows: bad range");
  Node n;
  n.op = Op::SliceRows;
  n.a = a;
  n.i0 = r0;
  n.i1 = r1;
  n.val = Matrix(r1 - r0, x.cols);
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) n.val(i - r0, j) = x(i, j);
  return push(std::move(n));
}

Tape::Id Tape::slice_cols(Id a, std::size_t c0, std::size_t c1) {
  const auto& x = value(a);
  if (!(c0 < c1 && c1 <= x.cols)) throw ShapeError("slice_cols: bad range");
  Node n;
  n.op = Op::SliceCols;
  n.a = a;
  n.i0 = c0;
  n.i1 = c1;
  n.val = Matrix(x.rows, c1 - c0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = c0; j < c1; ++j) n.val(i, j - c0) = x(i, j);
  return push(std::move(n));
}

Tape::Id Tape::select_pos(Id cond, Id a, Id b) {
  const auto& m = value(cond);
  const auto& x = value(a);
  const auto& y = value(b);
  require_same_shape(m, x, "select_pos");
  require_same_shape(x, y, "select_pos");
  Node n;
  n.op = Op::SelectPos;
  n.a = a;
  n.b = b;
  n.c = cond;
  n.val = x;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(m.data[i] > 0.0)) n.val.data[i] = y.data[i];
  return push(std::move(n));
}

Matrix& Tape::adj_of(Node& n) {
  if (n.adj.empty()) n.adj = Matrix::zeros(n.val.rows, n.val.cols);
  return n.adj;
}

const Matrix& Tape::grad(Id id) const {
  static const Matrix kEmpty;
  const auto& n = at(id);
  return n.adj.empty() ? kEmpty : n.adj;
}

void Tape::backward(Id loss) {
  if (swept_) throw ShapeError("backward: tape already swept; reset() first");
  swept_ = true;
  {
    auto& top = at(loss);
    if (top.val.rows != 1 || top.val.cols != 1)
      throw ShapeError("backward: loss node must be 1x1");
    adj_of(top).data[0] = 1.0;
  }

  for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = at(id);
    if (n.adj.empty()) continue;  // not reached from the loss
    const Matrix& g = n.adj;
    switch (n.op) {
      case Op::Const:
      case Op::Param:
        break;
      case Op::Add: {
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::Sub: {
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
        break;
      }
      case Op::Mul: {
        const auto& va = at(n.a).val;
        const auto& vb = at(n.b).val;
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * vb.data[i];
          gb.data[i] += g.data[i] * va.data[i];
        }
        break;
      }
      case Op::Div: {
        const auto& vb = at(n.b).val;
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double inv = 1.0 / vb.data[i];
          ga.data[i] += g.data[i] * inv;
          gb.data[i] -= g.data[i] * n.val.data[i] * inv;
        }
        break;
      }
      case Op::MatMul: {
        const auto& va = at(n.a).val;
        const auto& vb = at(n.b).val;
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        // ga += g * vb^T
        for (std::size_t i = 0; i < va.rows; ++i)
          for (std::size_t k = 0; k < vb.cols; ++k) {
            const double gik = g(i, k);
            for (std::size_t j = 0; j < va.cols; ++j) ga(i, j) += gik * vb(j, k);
          }
        // gb += va^T * g
        for (std::size_t i = 0; i < va.rows; ++i)
          for (std::size_t j = 0; j < va.cols; ++j) {
            const double aij = va(i, j);
            for (std::size_t k = 0; k < vb.cols; ++k) gb(j, k) += aij * g(i, k);
          }
        break;
      }
      case Op::AddRow: {
        auto& ga = adj_of(at(n.a));
        auto& gr = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) {
            ga(i, j) += g(i, j);
            gr.data[j] += g(i, j);
          }
        break;
      }
      case Op::Sigmoid: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.val.data[i];
          ga.data[i] += g.data[i] * s * (1.0 - s);
        }
        break;
      }
      case Op::Tanh: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = n.val.data[i];
          ga.data[i] += g.data[i] * (1.0 - t * t);
        }
        break;
      }
      case Op::Exp: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.val.data[i];
        break;
      }
      case Op::Log: {
        const auto& va = at(n.a).val;
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / va.data[i];
        break;
      }
      case Op::Sqrt: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] / (2.0 * n.val.data[i]);
        break;
      }
      case Op::Relu: {
        const auto& va = at(n.a).val;
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i)
          if (va.data[i] > 0.0) ga.data[i] += g.data[i];
        break;
      }
      case Op::Neg: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] -= g.data[i];
        break;
      }
      case Op::Scale: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.k;
        break;
      }
      case Op::Shift: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        break;
      }
      case Op::Pow: {
        const auto& va = at(n.a).val;
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * n.k * std::pow(va.data[i], n.k - 1.0);
        break;
      }
      case Op::Sum: {
        auto& ga = adj_of(at(n.a));
        const double gs = g.data[0];
        for (double& v : ga.data) v += gs;
        break;
      }
      case Op::Mean: {
        auto& ga = adj_of(at(n.a));
        const double gs = g.data[0] / static_cast<double>(ga.size());
        for (double& v : ga.data) v += gs;
        break;
      }
      case Op::SliceRows: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) ga(n.i0 + i, j) += g(i, j);
        break;
      }
      case Op::SliceCols: {
        auto& ga = adj_of(at(n.a));
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) ga(i, n.i0 + j) += g(i, j);
        break;
      }
      case Op::SelectPos: {
        const auto& cond = at(n.c).val;
        auto& ga = adj_of(at(n.a));
        auto& gb = adj_of(at(n.b));
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (cond.data[i] > 0.0)
            ga.data[i] += g.data[i];
          else
            gb.data[i] += g.data[i];
        }
        break;
      }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  swept_ = false;
}

}  // namespace blvt::nn
