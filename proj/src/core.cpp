#include "ntx/core.hpp"

#include <cmath>
#include <sstream>

namespace ntx {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(what + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << shape_str(m);
    throw ContractError(os.str());
  }
}

Act act_from_string(const std::string& s) {
  if (s == "relu") return Act::relu;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  throw ConfigError("unknown activation '" + s + "' (expected relu|tanh|sigmoid)");
}

const char* to_string(Act kind) {
  switch (kind) {
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
  }
  return "?";
}

Matrix activation(Act kind, const Matrix& x) {
  switch (kind) {
    case Act::relu: return x.cwiseMax(0.0);
    case Act::tanh: return x.array().tanh();
    case Act::sigmoid: return (1.0 / (1.0 + (-x.array()).exp())).matrix();
  }
  throw ContractError("activation: bad kind");
}

Matrix activation_grad(Act kind, const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "activation_grad");
  switch (kind) {
    case Act::relu: return (x.array() > 0.0).cast<double>().matrix();
    case Act::tanh: return (1.0 - y.array().square()).matrix();
    case Act::sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  throw ContractError("activation_grad: bad kind");
}

ProbVector softmax(const Vector& x) {
  require(x.size() > 0, "softmax: empty input");
  const double m = x.maxCoeff();
  Vector e = (x.array() - m).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& x) {
  require(x.size() > 0, "log_softmax: empty input");
  const double m = x.maxCoeff();
  const double lse = std::log((x.array() - m).exp().sum());
  return (x.array() - m - lse).matrix();
}

double log_loss(const std::vector<int>& labels, const Vector& probs) {
  require(!labels.empty(), "log_loss: empty input");
  require(static_cast<Index>(labels.size()) == probs.size(),
          "log_loss: labels and probs differ in length");
  double total = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y == 0 || y == 1, "log_loss: labels must be 0 or 1");
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    total += y == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(probs.size());
}

double row_dot_sum(const Matrix& w, const Matrix& r) {
  require_same_shape(w, r, "row_dot_sum");
  return w.cwiseProduct(r).sum();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions differ, " + shape_str(a) + " * " + shape_str(b));
  }
  return a * b;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  return a + b;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  return a.cwiseProduct(b);
}

Matrix transpose(const Matrix& a) { return a.transpose(); }

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  require(top.cols() == bottom.cols(), "concat_rows: column counts differ");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
  require(left.rows() == right.rows(), "concat_cols: row counts differ");
  Matrix out(left.rows(), left.cols() + right.cols());
  out.leftCols(left.cols()) = left;
  out.rightCols(right.cols()) = right;
  return out;
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

bool is_prob_vector(const Vector& v, double tol) {
  if (v.size() == 0) return false;
  if ((v.array() < 0.0).any() || (v.array() > 1.0).any()) return false;
  return std::abs(v.sum() - 1.0) <= tol;
}

void glorot_fill(Matrix& m, Rng& rng) {
  require(m.rows() > 0 && m.cols() > 0, "glorot_fill: empty matrix");
  const double bound =
      std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

}  // namespace ntx
