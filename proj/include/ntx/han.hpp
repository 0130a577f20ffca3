#pragma once

#include <ntx/recurrent.hpp>

#include <string>
#include <vector>

namespace ntx {

// Trainable self-attention pooling: u_t = tanh(W h_t [+ b]); alpha =
// softmax(u_t . u); s = sum_t alpha_t h_t — weights applied to the raw
// annotations.
struct SelfAttentionParams {
  Param* W = nullptr;  // A x H_in
  Param* b = nullptr;  // 1 x A, absent when the bias flag is off
  Param* u = nullptr;  // 1 x A context vector
};

SelfAttentionParams make_self_attention(ParamStore& store,
                                        const std::string& prefix, Index A,
                                        Index H_in, bool bias);

struct SelfAttendResult {
  Vector s;      // pooled vector, length H_in
  Vector alpha;  // length T, a probability vector
  Matrix ut;     // T x A cache of the tanh projections
};

SelfAttendResult self_attend(const SelfAttentionParams& params,
                             const Matrix& annotations);

// Given ds (gradient at the pooled vector), accumulates parameter gradients
// and returns the gradient at every annotation row.
Matrix self_attend_backward(const SelfAttentionParams& params,
                            const Matrix& annotations,
                            const SelfAttendResult& cache, const Vector& ds);

// --- hierarchical attention classifier -----------------------------------

struct HanConfig {
  Index H = 50;       // GRU width per direction, both levels
  Index d = 32;       // word embedding width
  Index A = 0;        // attention dimension; 0 means "use H"
  Index classes = 2;
  bool attention_bias = true;  // the literal formula omits the bias
};

struct HanModel {
  HanConfig cfg;
  Index vocab = 0;
  ParamStore store;
  Stack word_f, word_b, sent_f, sent_b;  // bidirectional GRUs, both levels
  SelfAttentionParams word_attn, sent_attn;

  Index attn_dim() const { return cfg.A > 0 ? cfg.A : cfg.H; }
};

HanModel make_han(const HanConfig& cfg, Index vocab_size, std::uint64_t seed);

// One bidirectional pass: annotation rows are [forward; backward].
struct BiRun {
  SequenceCache fwd, bwd;
  Matrix ann;  // T x 2H
};

struct SentenceTrace {
  Index original_index = 0;    // position in the document as given
  std::vector<int> tokens;     // word indices actually consumed
  BiRun words;                 // word-level encoder caches
  SelfAttendResult pooled;     // word-level attention over this sentence
};

struct HanForward {
  std::vector<SentenceTrace> sentences;  // empty sentences are skipped
  BiRun sent_level;
  SelfAttendResult doc;   // sentence-level attention
  ProbVector probs;       // class distribution
  double loss = 0.0;      // negative log-likelihood when a label was given
};

// sentences: word indices per sentence (1..V; empty sentences are skipped
// with a warning on stderr). label >= 0 also computes the loss.
HanForward han_forward(const HanModel& model,
                       const std::vector<std::vector<int>>& sentences,
                       int label = -1);
void han_backward(HanModel& model, const HanForward& fwd, int label);

double han_loss(const HanModel& model,
                const std::vector<std::vector<int>>& sentences, int label);

// Word attention re-weighed by its sentence's attention; scores over the
// document sum to 1.
struct WordImportance {
  Index sentence = 0;  // original sentence index
  Index position = 0;  // word position within the sentence
  double score = 0.0;
};

std::vector<WordImportance> reweighed_word_importance(const HanForward& fwd);

// CSV "sentence_idx,word_idx,token,word_alpha,sentence_alpha,product";
// token text is looked up in `tokens` (original sentence indexing) when
// provided, otherwise the numeric word index is written.
void write_han_attention_csv(
    const std::string& path, const HanForward& fwd,
    const std::vector<std::vector<std::string>>* tokens = nullptr);

}  // namespace ntx
