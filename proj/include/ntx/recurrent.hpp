#pragma once

#include <ntx/core.hpp>
#include <ntx/train.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ntx {

enum class CellKind { rnn, lstm, gru };
CellKind cell_kind_from_string(const std::string& s);
const char* to_string(CellKind kind);

// One affine block act(U x + W h + b); parameters live in a ParamStore and
// are shared by every time step.
struct GateParams {
  Param* U = nullptr;  // H x d_in
  Param* W = nullptr;  // H x H
  Param* b = nullptr;  // 1 x H
};

struct RnnCellParams {
  GateParams cand;  // h_t = tanh(U x_t + W h_{t-1} + b)
};

struct LstmCellParams {
  GateParams f, i, c, o;  // forget, input, candidate, output blocks
};

struct GruCellParams {
  GateParams r, z, h;  // reset, update, candidate blocks
};

struct Cell {
  CellKind kind = CellKind::rnn;
  Index d_in = 0;
  Index H = 0;
  RnnCellParams rnn;
  LstmCellParams lstm;
  GruCellParams gru;
};

// Registers the cell's parameters under "<prefix>_U", "<prefix>_W_f", ...
// (per-gate suffixes for lstm/gru) and wires the returned views. The LSTM
// forget bias initializes to one.
Cell make_cell(ParamStore& store, CellKind kind, const std::string& prefix,
               Index d_in, Index H);

// Everything a backward step needs; fields unused by a cell kind stay empty.
struct StepCache {
  Vector x, h_prev, c_prev;
  Vector f, i, o, cand;  // lstm activations
  Vector r, z, rh;       // gru activations; rh = r o h_prev
  Vector tanh_c;         // lstm tanh(c_t)
  Vector h, c;           // step outputs
};

// Single steps (Eq. 6, the four-gate LSTM, and the Eq. 12/13 GRU in the
// formulation that gates the PREVIOUS state with z and applies the reset to
// h_{t-1} before W_h).
Vector rnn_step(const Cell& cell, const Vector& x, const Vector& h_prev,
                StepCache* cache = nullptr);
std::pair<Vector, Vector> lstm_step(const Cell& cell, const Vector& x,
                                    const Vector& h_prev,
                                    const Vector& c_prev,
                                    StepCache* cache = nullptr);
Vector gru_step(const Cell& cell, const Vector& x, const Vector& h_prev,
                StepCache* cache = nullptr);

// Kind-dispatched step: h and c are read as previous state and overwritten
// with the new one (c ignored except for lstm).
void cell_step(const Cell& cell, const Vector& x, Vector& h, Vector& c,
               StepCache* cache = nullptr);

// Backward through one step. dh/dc are the gradients at this step's outputs;
// parameter gradients accumulate into the store; dx, dh_prev and dc_prev
// receive (accumulate into) the gradients for the step's inputs.
void cell_backward(const Cell& cell, const StepCache& cache, const Vector& dh,
                   const Vector& dc, Vector& dx, Vector& dh_prev,
                   Vector& dc_prev);

// --- vertical stacking -------------------------------------------------

struct Stack {
  std::vector<Cell> cells;  // layer 0 consumes d_in, the rest consume H
  CellKind kind() const { return cells.front().kind; }
  Index depth() const { return static_cast<Index>(cells.size()); }
  Index H() const { return cells.front().H; }
  Index d_in() const { return cells.front().d_in; }
};

Stack make_stack(ParamStore& store, CellKind kind, const std::string& prefix,
                 Index d_in, Index H, Index depth);

struct SequenceCache {
  std::vector<std::vector<StepCache>> steps;  // [t][layer]
  Matrix top_h;                               // T x H: top layer per step
  std::vector<Vector> final_h, final_c;       // per layer
  Index T() const { return static_cast<Index>(steps.size()); }
};

// Unrolls the stack over the inputs; layer l at step t consumes layer l-1's
// hidden state at step t. Initial states default to zeros.
SequenceCache run_sequence(const Stack& stack,
                           const std::vector<Vector>& inputs,
                           const std::vector<Vector>* h0 = nullptr,
                           const std::vector<Vector>* c0 = nullptr);

// Full BPTT. dtop[t] is the loss gradient at the top-layer state of step t
// (pass an empty vector for steps without one); dfinal_h/dfinal_c, when
// given, add gradients at the final per-layer states. Returns the gradient
// for every input vector; dh0/dc0, when non-null, receive the gradients at
// the initial states.
std::vector<Vector> sequence_backward(
    const Stack& stack, const SequenceCache& cache,
    const std::vector<Vector>& dtop,
    const std::vector<Vector>* dfinal_h = nullptr,
    const std::vector<Vector>* dfinal_c = nullptr,
    std::vector<Vector>* dh0 = nullptr, std::vector<Vector>* dc0 = nullptr);

// --- language model ----------------------------------------------------

struct LmConfig {
  CellKind kind = CellKind::gru;
  Index H = 100;
  Index d = 32;           // embedding width (embedded mode)
  Index depth = 1;
  bool one_hot = false;   // feed e_{index-1} of size V instead of embeddings
  bool head_bias = true;  // Eq. 7 literal mode turns the head bias off
};

// Token indices 1..V are the model's classes (class j <-> index j+1);
// index 0 (padding) is never predicted nor fed. The pipeline's <bos> starts
// every sequence.
struct LanguageModel {
  LmConfig cfg;
  Index vocab = 0;  // V
  int bos = 0;      // <bos> index in [1, V]
  ParamStore store;
  Stack stack;
};

LanguageModel make_lm(const LmConfig& cfg, Index vocab_size, int bos_index,
                      std::uint64_t seed);

struct LmForward {
  std::vector<int> fed;        // [bos, x_1, ..., x_{T-1}]
  std::vector<Vector> inputs;  // vectors actually fed to the stack
  SequenceCache seq;
  Matrix probs;                // T x V softmax rows (Eq. 7)
  double loss = 0.0;           // mean NLL of the targets
};

// Teacher-forced pass scoring targets x_1..x_T (include <eos> yourself when
// the task calls for it).
LmForward lm_forward(const LanguageModel& lm, const std::vector<int>& targets);
void lm_backward(LanguageModel& lm, const LmForward& fwd,
                 const std::vector<int>& targets);

// Eq. 8: log P[x_1] + sum_t log P[x_t | x_<t].
double sequence_logprob(const LanguageModel& lm,
                        const std::vector<int>& indices);

// Autoregressive sampling; stops at eos_index (pass 0 to disable) or after
// max_steps. Temperatures below 1e-6 mean argmax decoding.
std::vector<int> sample(const LanguageModel& lm, std::size_t max_steps,
                        double temperature, Rng& rng, int eos_index);

}  // namespace ntx
