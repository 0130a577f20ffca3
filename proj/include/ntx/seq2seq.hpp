#pragma once

#include <ntx/recurrent.hpp>

#include <string>
#include <vector>

namespace ntx {

enum class AttnMode { global, local_monotonic, local_predictive };
enum class ScoreKind { dot, general, concat };
AttnMode attn_mode_from_string(const std::string& s);
ScoreKind score_kind_from_string(const std::string& s);
const char* to_string(AttnMode m);
const char* to_string(ScoreKind k);

struct Seq2SeqConfig {
  CellKind kind = CellKind::gru;
  Index H = 64;     // encoder/decoder hidden width
  Index d = 32;     // embedding width, both languages
  Index depth = 1;  // encoder and decoder layer count
  bool bidirectional = false;
  AttnMode mode = AttnMode::global;
  ScoreKind score = ScoreKind::dot;
  Index D = 2;           // local attention half-width
  bool gaussian = true;  // local modes: apply the truncated-normal factor
};

// Token indices 1..V on both sides; 0 is padding and never crosses the
// model boundary. <bos>/<eos> are target-side vocabulary entries.
struct Seq2Seq {
  Seq2SeqConfig cfg;
  Index src_vocab = 0, tgt_vocab = 0;
  int bos = 0, eos = 0;
  ParamStore store;
  Stack enc_f, enc_b, dec;  // enc_b only for bidirectional encoders

  Index H_enc() const { return cfg.bidirectional ? 2 * cfg.H : cfg.H; }
};

Seq2Seq make_seq2seq(const Seq2SeqConfig& cfg, Index src_vocab,
                     Index tgt_vocab, int tgt_bos, int tgt_eos,
                     std::uint64_t seed);

// --- encoder -------------------------------------------------------------

struct EncoderOutput {
  Matrix annotations;          // T_x x H_enc (bidirectional rows are
                               // [forward_state; backward_state])
  std::vector<Vector> h0, c0;  // decoder initial states, one per layer
  // caches for backpropagation
  SequenceCache fwd, bwd;
  std::vector<Vector> inputs_f, inputs_b;  // embedded source (bwd reversed)
  std::vector<int> src;
};

EncoderOutput encode(const Seq2Seq& model, const std::vector<int>& source);

// --- attention -----------------------------------------------------------

// Comparison between one decoder state and one annotation.
double score(const Seq2Seq& model, ScoreKind kind, const Vector& h_t,
             const Vector& h_bar);

// One attention evaluation with everything backward needs. Window bounds
// are 1-based source positions, inclusive.
struct AttnStep {
  Index lo = 1, hi = 1;
  Vector scores;        // raw scores on the window
  Vector sm;            // softmax over the window
  Vector gauss;         // truncated-normal factors (ones when disabled)
  Vector alpha;         // sm .* gauss (NOT renormalized; see README)
  Vector c;             // context vector, length H_enc
  Matrix concat_u;      // concat score: tanh rows, window x A
  double p = 0.0;       // window center
  // predictive-position cache
  Vector wp_h, tanh_wp_h;
  double sig = 0.0;     // sigmoid(v_p . tanh(W_p h_t))
  bool predictive = false;
};

// step is the 1-based decoder position (the monotonic center).
AttnStep attend(const Seq2Seq& model, const Matrix& annotations,
                const Vector& h_t, Index step);

// Backward through one attention evaluation: given dc (gradient at the
// context vector), accumulates parameter gradients and adds the input-side
// gradients into dh_t and dannotations.
void attend_backward(Seq2Seq& model, const Matrix& annotations,
                     const Vector& h_t, const AttnStep& cache,
                     const Vector& dc, Vector& dh_t, Matrix& dannotations);

// --- decoding ------------------------------------------------------------

struct DecodeState {
  std::vector<Vector> h, c;  // per decoder layer
  Index t = 0;               // decoder steps taken so far
};

DecodeState initial_state(const Seq2Seq& model, const EncoderOutput& enc);

// Feeds y_prev, advances the state, and returns the distribution over the
// target vocabulary (class j <-> token j+1). Fills *attn when non-null.
ProbVector decode_step(const Seq2Seq& model, const EncoderOutput& enc,
                       int y_prev, DecodeState& state,
                       AttnStep* attn = nullptr);

// --- training ------------------------------------------------------------

struct Seq2SeqForward {
  EncoderOutput enc;
  std::vector<int> fed;            // [bos, y_1..y_{T-1}]
  std::vector<Vector> dec_inputs;  // embedded fed tokens
  SequenceCache dec_seq;
  std::vector<AttnStep> attn;      // one per target step
  Matrix hcat;                     // T_y x (H_enc + H): [c_t; h_t] rows
  Matrix htilde;                   // T_y x H attentional states
  Matrix probs;                    // T_y x V_tgt
  double loss = 0.0;               // mean per-token negative log-likelihood
};

Seq2SeqForward seq2seq_forward(const Seq2Seq& model,
                               const std::vector<int>& source,
                               const std::vector<int>& target);
double seq2seq_loss(const Seq2Seq& model, const std::vector<int>& source,
                    const std::vector<int>& target);
void seq2seq_backward(Seq2Seq& model, const Seq2SeqForward& fwd,
                      const std::vector<int>& target);

// --- search --------------------------------------------------------------

struct BeamHypothesis {
  std::vector<int> tokens;  // includes <eos> when finished
  double logprob = 0.0;
  DecodeState state;
  bool finished = false;
};

// Standard beam search: expand every live hypothesis over the full target
// vocabulary, keep the top K children by accumulated log-probability;
// children that emit <eos> retire into the result pool. length_norm > 0
// divides final scores by length^length_norm (defaults off).
std::vector<BeamHypothesis> beam_search(const Seq2Seq& model,
                                        const EncoderOutput& enc, Index K,
                                        Index max_len,
                                        double length_norm = 0.0);

// Best hypothesis' tokens for a raw source sentence; optionally records the
// attention trace of the winning hypothesis re-decoded step by step.
std::vector<int> translate(const Seq2Seq& model, const std::vector<int>& source,
                           Index K, Index max_len,
                           std::vector<AttnStep>* trace = nullptr);

// CSV rows "step,source_position,weight" (both indices 1-based).
void write_attention_csv(const std::string& path,
                         const std::vector<AttnStep>& trace);

}  // namespace ntx
