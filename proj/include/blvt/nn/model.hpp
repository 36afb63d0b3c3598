#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blvt/nn/autodiff.hpp"
#include "blvt/nn/matrix.hpp"

namespace blvt::nn {

// Single-layer LSTM with combined gate matrices, gate order [i, f, g, o],
// followed by a dense head whose two logits pass through softmax.
struct ModelParams {
  int input = 18;
  int hidden = 64;
  Matrix W;   // input x 4*hidden
  Matrix U;   // hidden x 4*hidden
  Matrix b;   // 1 x 4*hidden
  Matrix Wh;  // hidden x 2
  Matrix bh;  // 1 x 2

  void validate() const;  // throws ShapeError on inconsistent shapes
};

// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) for every weight and bias, then
// +1 on the forget-gate bias block. Fill order is fixed (W, U, b, Wh, bh,
// each row-major) so a seed fully determines the result.
ModelParams init_params(std::uint64_t seed, int input = 18, int hidden = 64);

// Runs the window rows through the LSTM oldest-first and returns the
// softmax allocation (w_u, w_d). window_rows x input, row-major.
std::array<double, 2> forward(const ModelParams& params, const Matrix& window);

// Parameter nodes of one tape upload.
struct TapeModel {
  Tape::Id W = -1;
  Tape::Id U = -1;
  Tape::Id b = -1;
  Tape::Id Wh = -1;
  Tape::Id bh = -1;
  int input = 0;
  int hidden = 0;
};

TapeModel upload_params(Tape& tape, const ModelParams& params);

// Batched tape forward: steps[l] is the (N, input) matrix of the l-th
// window row across N windows, oldest first. Returns (w_u, w_d), each an
// (N, 1) node. Uses the two-asset softmax identity w_u = sigma(z_u - z_d).
std::pair<Tape::Id, Tape::Id> forward_batched(Tape& tape, const TapeModel& model,
                                              const std::vector<Matrix>& steps);

// Versioned binary checkpoint of all named tensors plus the seed that
// produced the run; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params, std::uint64_t seed);

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace blvt::nn
