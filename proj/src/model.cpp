#include "blvt/nn/model.hpp"

#include <cmath>

#include "blvt/errors.hpp"
#include "blvt/rng.hpp"

namespace blvt::nn {

void ModelParams::validate() const {
  const auto h = static_cast<std::size_t>(hidden);
  const auto in = static_cast<std::size_t>(input);
  if (input < 1 || hidden < 1) throw ShapeError("model: non-positive dimensions");
  if (W.rows != in || W.cols != 4 * h) throw ShapeError("model: bad W shape");
  if (U.rows != h || U.cols != 4 * h) throw ShapeError("model: bad U shape");
  if (b.rows != 1 || b.cols != 4 * h) throw ShapeError("model: bad b shape");
  if (Wh.rows != h || Wh.cols != 2) throw ShapeError("model: bad Wh shape");
  if (bh.rows != 1 || bh.cols != 2) throw ShapeError("model: bad bh shape");
}

ModelParams init_params(std::uint64_t seed, int input, int hidden) {
  if (input < 1 || hidden < 1) throw ShapeError("init_params: non-positive dimensions");
  ModelParams p;
  p.input = input;
  p.hidden = hidden;
  const auto h = static_cast<std::size_t>(hidden);
  const auto in = static_cast<std::size_t>(input);
  p.W = Matrix(in, 4 * h);
  p.U = Matrix(h, 4 * h);
  p.b = Matrix(1, 4 * h);
  p.Wh = Matrix(h, 2);
  p.bh = Matrix(1, 2);

  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Matrix* m : {&p.W, &p.U, &p.b, &p.Wh, &p.bh})
    for (double& v : m->data) v = rng.uniform(-bound, bound);
  // forget gate block is [hidden, 2*hidden)
  for (std::size_t j = h; j < 2 * h; ++j) p.b.data[j] += 1.0;
  return p;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::array<double, 2> forward(const ModelParams& params, const Matrix& window) {
  params.validate();
  const auto h = static_cast<std::size_t>(params.hidden);
  if (window.cols != static_cast<std::size_t>(params.input) || window.rows == 0)
    throw ShapeError("forward: window must be L x input");

  std::vector<double> hs(h, 0.0), cs(h, 0.0), gates(4 * h, 0.0);
  Matrix x(1, window.cols);
  for (std::size_t t = 0; t < window.rows; ++t) {
    for (std::size_t j = 0; j < window.cols; ++j) x.data[j] = window(t, j);
    // gates = x*W + h*U + b, inner index ascending (matches the batched path)
    Matrix xw = matmul(x, params.W);
    Matrix hu(1, 4 * h, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
      const double hk = hs[k];
      const double* urow = &params.U.data[k * 4 * h];
      for (std::size_t j = 0; j < 4 * h; ++j) hu.data[j] += hk * urow[j];
    }
    for (std::size_t j = 0; j < 4 * h; ++j) gates[j] = xw.data[j] + hu.data[j] + params.b.data[j];

    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid(gates[j]);
      const double fg = sigmoid(gates[h + j]);
      const double gg = std::tanh(gates[2 * h + j]);
      const double og = sigmoid(gates[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
    }
  }

  // products first, bias last: the association of the batched head
  double zu = 0.0, zd = 0.0;
  for (std::size_t k = 0; k < h; ++k) {
    zu += hs[k] * params.Wh(k, 0);
    zd += hs[k] * params.Wh(k, 1);
  }
  zu += params.bh.data[0];
  zd += params.bh.data[1];
  // softmax over two logits reduces to the sigmoid of their difference
  const double wu = sigmoid(zu - zd);
  return {wu, 1.0 - wu};
}

TapeModel upload_params(Tape& tape, const ModelParams& params) {
  params.validate();
  TapeModel m;
  m.W = tape.param(params.W);
  m.U = tape.param(params.U);
  m.b = tape.param(params.b);
  m.Wh = tape.param(params.Wh);
  m.bh = tape.param(params.bh);
  m.input = params.input;
  m.hidden = params.hidden;
  return m;
}

std::pair<Tape::Id, Tape::Id> forward_batched(Tape& tape, const TapeModel& model,
                                              const std::vector<Matrix>& steps) {
  if (steps.empty()) throw ShapeError("forward_batched: no steps");
  const std::size_t N = steps.front().rows;
  const auto h = static_cast<std::size_t>(model.hidden);
  for (const auto& s : steps)
    if (s.rows != N || s.cols != static_cast<std::size_t>(model.input))
      throw ShapeError("forward_batched: inconsistent step shapes");

  Tape::Id hprev = -1;
  Tape::Id cprev = -1;
  for (const auto& step : steps) {
    const Tape::Id x = tape.constant(step);
    const Tape::Id xw = tape.matmul(x, model.W);
    // (x*W + h*U) + b, associated exactly as in the plain forward
    const Tape::Id pre = hprev >= 0 ? tape.add(xw, tape.matmul(hprev, model.U)) : xw;
    const Tape::Id gates = tape.add_row(pre, model.b);
    const Tape::Id ig = tape.sigmoid(tape.slice_cols(gates, 0, h));
    const Tape::Id fg = tape.sigmoid(tape.slice_cols(gates, h, 2 * h));
    const Tape::Id gg = tape.tanh(tape.slice_cols(gates, 2 * h, 3 * h));
    const Tape::Id og = tape.sigmoid(tape.slice_cols(gates, 3 * h, 4 * h));

    const Tape::Id c =
        cprev >= 0 ? tape.add(tape.mul(fg, cprev), tape.mul(ig, gg)) : tape.mul(ig, gg);
    const Tape::Id hnew = tape.mul(og, tape.tanh(c));
    hprev = hnew;
    cprev = c;
  }

  const Tape::Id logits = tape.add_row(tape.matmul(hprev, model.Wh), model.bh);
  const Tape::Id zu = tape.slice_cols(logits, 0, 1);
  const Tape::Id zd = tape.slice_cols(logits, 1, 2);
  const Tape::Id wu = tape.sigmoid(tape.sub(zu, zd));
  const Tape::Id wd = tape.shift(tape.neg(wu), 1.0);
  return {wu, wd};
}

}  // namespace blvt::nn
