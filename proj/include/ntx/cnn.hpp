#pragma once

#include <ntx/core.hpp>
#include <ntx/text.hpp>
#include <ntx/train.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace ntx {

struct CnnConfig {
  std::vector<Index> regions{2, 3, 4};  // window sizes h, one branch each
  Index nf = 100;                       // filters per branch
  Index k = 1;                          // pooling order
  Index s = 0;                          // fixed document length
  Index d = 0;                          // embedding dimension
  Index output_dim = 2;                 // 1 -> sigmoid head, >=2 -> softmax
  Index stride = 1;
  Act activation = Act::relu;
  bool bias_after_activation = false;   // c = f(o) + b instead of f(o + b)
  bool static_embedding = false;        // freeze the embedding table
};

// Parallel convolution branches over the word-vector matrix, k-max pooling,
// concatenation, affine head. Parameters live in `store` under the names
// "embedding", "conv_h<h>_W", "conv_h<h>_b", "head_W", "head_b".
struct CnnModel {
  CnnConfig cfg;
  Index vocab_size = 0;  // V; embedding has V+1 rows
  ParamStore store;

  Index feature_len(std::size_t branch) const;  // (s-h)/stride + 1
  Index pooled_len() const;                     // k * nf * #branches
  const Matrix& embedding() const { return store.at("embedding").value; }
};

CnnModel make_cnn(const CnnConfig& cfg, Index vocab_size, std::uint64_t seed);

// Feature map of one branch: entry (f, i) pairs filter f with the window
// starting at row i*stride. Bias placement follows the config flag.
Matrix conv_forward(const Matrix& a, const Matrix& w, const Vector& b,
                    Index h, Act act, Index stride,
                    bool bias_after_activation);

// The k greatest values of each feature-map row, kept in original sequence
// order; branches concatenate in branch-then-filter order. chosen, when
// non-null, receives the selected column of every pooled slot.
Vector kmax_pool(const std::vector<Matrix>& maps, Index k,
                 std::vector<std::vector<std::vector<Index>>>* chosen = nullptr);

struct CnnCache {
  std::vector<int> indices;   // document indices ([] when fed a raw matrix)
  Matrix a;                   // s x d input matrix
  std::vector<Matrix> pre;    // per branch: activation input (nf x L)
  std::vector<Matrix> maps;   // per branch: pooled quantity (nf x L)
  std::vector<std::vector<std::vector<Index>>> pool_idx;
  Vector pooled;
  Vector logits;
  ProbVector probs;
  // staleness fingerprint
  Index s = 0, d = 0, output_dim = 0;
  double head_w00 = 0.0, head_b0 = 0.0;
};

std::pair<ProbVector, CnnCache> cnn_forward(const CnnModel& model,
                                            const EncodedDoc& doc);
// Same forward from an explicit input matrix (no embedding lookup); the
// cache then carries no indices and backward skips the embedding gradient.
std::pair<ProbVector, CnnCache> cnn_forward_matrix(const CnnModel& model,
                                                   const Matrix& a);

// Accumulates parameter gradients into model.store (embedding rows skipped
// in static mode and for padding) and returns dLoss/dA. grad_logits is the
// upstream gradient at the pre-softmax/pre-sigmoid head output. Throws
// ContractError when the cache does not match the current model.
Matrix cnn_backward(CnnModel& model, const CnnCache& cache,
                    const Vector& grad_logits);

// The same backward pass restricted to the input gradient: returns dOut/dA
// without touching any parameter gradient (read-only inspection path).
Matrix cnn_input_grad(const CnnModel& model, const CnnCache& cache,
                      const Vector& grad_logits);

// Cross-entropy gradient at the logits for a class label, covering both the
// softmax head and the 1-neuron sigmoid head.
Vector classification_grad(const CnnModel& model, const ProbVector& probs,
                           int label);
double classification_loss(const ProbVector& probs, int label);
int predicted_class(const ProbVector& probs);

struct CnnParamCount {
  std::size_t embedding = 0;
  std::size_t conv = 0;
  std::size_t head = 0;
  std::size_t total() const { return embedding + conv + head; }
};

CnnParamCount param_count(const CnnModel& model);

}  // namespace ntx
