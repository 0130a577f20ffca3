#pragma once

#include "ntx/types.hpp"

namespace ntx {

enum class Act { relu, tanh, sigmoid };

Act act_from_string(const std::string& s);
const char* to_string(Act kind);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Elementwise activation; shape preserved.
Matrix activation(Act kind, const Matrix& x);

// Derivative of the activation with respect to its pre-activation input,
// given both the pre-activation x and the output y = activation(kind, x).
// relu uses the zero subgradient at the kink.
Matrix activation_grad(Act kind, const Matrix& x, const Matrix& y);

// Numerically safe softmax (max subtraction; exact by shift invariance).
ProbVector softmax(const Vector& x);
Vector log_softmax(const Vector& x);

// Mean binary cross entropy over N (label, probability-of-class-1) pairs.
// Probabilities are clamped to [1e-12, 1 - 1e-12] before the logs.
double log_loss(const std::vector<int>& labels, const Vector& probs);

// Frobenius inner product: sum of the row-wise dot products of two
// same-shape matrices.
double row_dot_sum(const Matrix& w, const Matrix& r);

// Shape-checked carriers. No implicit broadcasting anywhere: a mismatch is
// a ContractError, never a silent resize.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);
Matrix concat_cols(const Matrix& left, const Matrix& right);
Vector concat(const Vector& a, const Vector& b);

bool is_prob_vector(const Vector& v, double tol = 1e-9);

// Glorot/Xavier uniform fill: entries ~ U(-b, b) with b = sqrt(6/(fan_in +
// fan_out)), fan_in = cols, fan_out = rows. Draws row-major so the stream of
// rng consumption is well defined.
void glorot_fill(Matrix& m, Rng& rng);

}  // namespace ntx
