#include <doctest.h>

#include <ntx/seq2seq.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

using namespace ntx;

namespace {

Seq2SeqConfig toy_config() {
  Seq2SeqConfig cfg;
  cfg.H = 4;
  cfg.d = 3;
  cfg.depth = 1;
  cfg.kind = CellKind::gru;
  return cfg;
}

Vector random_vec(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

// Exhaustive enumeration of every decode path (stop at <eos> or max_len),
// returning the highest-scoring token sequence.
void enumerate_paths(const Seq2Seq& model, const EncoderOutput& enc,
                     const DecodeState& state, int prev,
                     std::vector<int>& prefix, double lp, Index max_len,
                     double& best_lp, std::vector<int>& best_tokens) {
  if (!prefix.empty() &&
      (prefix.back() == model.eos ||
       static_cast<Index>(prefix.size()) == max_len)) {
    if (lp > best_lp) {
      best_lp = lp;
      best_tokens = prefix;
    }
    return;
  }
  DecodeState st = state;
  const ProbVector dist = decode_step(model, enc, prev, st);
  for (Index j = 0; j < dist.size(); ++j) {
    prefix.push_back(static_cast<int>(j) + 1);
    enumerate_paths(model, enc, st, static_cast<int>(j) + 1, prefix,
                    lp + std::log(dist[j]), max_len, best_lp, best_tokens);
    prefix.pop_back();
  }
}

}  // namespace

TEST_SUITE("seq2seq") {

TEST_CASE("a single-token bidirectional encoding concatenates both "
          "directions' view of the same token") {
  Seq2SeqConfig cfg = toy_config();
  cfg.bidirectional = true;
  cfg.score = ScoreKind::general;
  Seq2Seq m = make_seq2seq(cfg, 5, 4, 4, 3, 11);
  EncoderOutput enc = encode(m, {2});
  REQUIRE(enc.annotations.rows() == 1);
  REQUIRE(enc.annotations.cols() == 8);
  const Vector x = m.store.at("src_embedding").value.row(2).transpose();
  const Vector hf = gru_step(m.enc_f.cells[0], x, Vector::Zero(4));
  const Vector hb = gru_step(m.enc_b.cells[0], x, Vector::Zero(4));
  for (Index i = 0; i < 4; ++i) {
    CHECK(enc.annotations(0, i) == hf[i]);
    CHECK(enc.annotations(0, 4 + i) == hb[i]);
  }
}

TEST_CASE("the backward encoder consumes the source reversed and its states "
          "line up with the forward positions") {
  Seq2SeqConfig cfg = toy_config();
  cfg.bidirectional = true;
  cfg.score = ScoreKind::general;
  Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 13);
  const std::vector<int> src{3, 1, 5, 2};
  EncoderOutput enc = encode(m, src);

  // feed the reversed sentence by hand through the backward stack
  Vector h = Vector::Zero(4);
  std::vector<Vector> back_states;
  for (int k = 3; k >= 0; --k) {
    const Vector x =
        m.store.at("src_embedding").value.row(src[k]).transpose();
    h = gru_step(m.enc_b.cells[0], x, h);
    back_states.push_back(h);
  }
  // back_states[j] belongs to source position 3 - j
  for (Index t = 0; t < 4; ++t)
    for (Index i = 0; i < 4; ++i)
      CHECK(enc.annotations(t, 4 + i) == back_states[3 - t][i]);

  // reversing the input reverses the backward stack's state sequence:
  // enc2's backward run consumes src in original order, so its k-th state
  // equals a forward-order pass of the backward cell over src
  std::vector<int> rev(src.rbegin(), src.rend());
  EncoderOutput enc2 = encode(m, rev);
  Vector hh = Vector::Zero(4);
  for (Index k = 0; k < 4; ++k) {
    const Vector x =
        m.store.at("src_embedding").value.row(src[k]).transpose();
    hh = gru_step(m.enc_b.cells[0], x, hh);
    for (Index i = 0; i < 4; ++i) CHECK(enc2.bwd.top_h(k, i) == hh[i]);
  }
}

TEST_CASE("a fixed-seed unidirectional encoder matches the hand-unrolled "
          "recurrence") {
  Seq2SeqConfig cfg = toy_config();
  Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 17);
  const std::vector<int> src{4, 2, 6, 1};
  EncoderOutput enc = encode(m, src);
  Vector h = Vector::Zero(4);
  for (Index t = 0; t < 4; ++t) {
    const Vector x =
        m.store.at("src_embedding").value.row(src[t]).transpose();
    h = gru_step(m.enc_f.cells[0], x, h);
    for (Index i = 0; i < 4; ++i) CHECK(enc.annotations(t, i) == h[i]);
  }
  // unidirectional: decoder starts from the final encoder state
  for (Index i = 0; i < 4; ++i) CHECK(enc.h0[0][i] == h[i]);
}

TEST_CASE("score functions: dot on orthogonal vectors is zero, general with "
          "identity weights reduces to dot, and all three match scalar "
          "oracles") {
  Seq2SeqConfig cfg = toy_config();
  cfg.score = ScoreKind::general;
  Seq2Seq m = make_seq2seq(cfg, 4, 4, 4, 3, 23);

  Vector a(4), b(4);
  a << 1, 0, 2, 0;
  b << 0, 3, 0, -5;
  CHECK(score(m, ScoreKind::dot, a, b) == 0.0);

  m.store.at("attn_W").value.setIdentity();
  Rng rng(3);
  const Vector h = random_vec(4, rng);
  const Vector ann = random_vec(4, rng);
  CHECK(score(m, ScoreKind::general, h, ann) ==
        doctest::Approx(score(m, ScoreKind::dot, h, ann)).epsilon(1e-14));

  // scalar oracles on a fresh random instance
  Seq2SeqConfig cc = toy_config();
  cc.score = ScoreKind::concat;
  Seq2Seq mc = make_seq2seq(cc, 4, 4, 4, 3, 29);
  double dot_ref = 0.0;
  for (Index i = 0; i < 4; ++i) dot_ref += h[i] * ann[i];
  CHECK(score(mc, ScoreKind::dot, h, ann) ==
        doctest::Approx(dot_ref).epsilon(1e-14));

  Seq2SeqConfig cg = toy_config();
  cg.score = ScoreKind::general;
  Seq2Seq mg = make_seq2seq(cg, 4, 4, 4, 3, 31);
  const Matrix& W = mg.store.at("attn_W").value;
  double gen_ref = 0.0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) gen_ref += h[i] * W(i, j) * ann[j];
  CHECK(score(mg, ScoreKind::general, h, ann) ==
        doctest::Approx(gen_ref).epsilon(1e-13));

  const Matrix& Wa = mc.store.at("attn_Wa").value;
  const Matrix& v = mc.store.at("attn_v").value;
  double con_ref = 0.0;
  for (Index r = 0; r < 4; ++r) {
    double s = 0.0;
    for (Index j = 0; j < 4; ++j) s += Wa(r, j) * h[j];
    for (Index j = 0; j < 4; ++j) s += Wa(r, 4 + j) * ann[j];
    con_ref += v(0, r) * std::tanh(s);
  }
  CHECK(score(mc, ScoreKind::concat, h, ann) ==
        doctest::Approx(con_ref).epsilon(1e-13));
}

TEST_CASE("dot attention refuses mismatched widths") {
  Seq2SeqConfig cfg = toy_config();
  cfg.bidirectional = true;  // annotations twice as wide as the decoder
  cfg.score = ScoreKind::dot;
  CHECK_THROWS_AS(make_seq2seq(cfg, 4, 4, 4, 3, 1), ConfigError);
}

TEST_CASE("equal scores give the uniform average of annotations") {
  Seq2Seq m = make_seq2seq(toy_config(), 5, 4, 4, 3, 37);
  EncoderOutput enc = encode(m, {1, 2, 3, 4, 5});
  AttnStep a = attend(m, enc.annotations, Vector::Zero(4), 1);
  const Vector mean = enc.annotations.colwise().mean().transpose();
  for (Index w = 0; w < 5; ++w)
    CHECK(a.alpha[w] == doctest::Approx(0.2).epsilon(1e-12));
  for (Index i = 0; i < 4; ++i)
    CHECK(a.c[i] == doctest::Approx(mean[i]).epsilon(1e-12));
}

TEST_CASE("a dominating score collapses the context onto its annotation") {
  Seq2Seq m = make_seq2seq(toy_config(), 5, 4, 4, 3, 41);
  Matrix ann = Matrix::Zero(4, 4);
  ann(2, 0) = 1.0;  // only annotation 3 aligns with the query direction
  ann(0, 1) = 0.3;
  ann(1, 2) = -0.4;
  ann(3, 3) = 0.9;
  Vector h = Vector::Zero(4);
  h[0] = 50.0;  // dot scores: {0, 0, 50, 0}
  AttnStep a = attend(m, ann, h, 1);
  for (Index i = 0; i < 4; ++i)
    CHECK(std::abs(a.c[i] - ann(2, i)) < 1e-12);
}

TEST_CASE("global attention matches a direct-evaluation oracle on five "
          "annotations") {
  Seq2SeqConfig cfg = toy_config();
  cfg.score = ScoreKind::general;
  Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 43);
  EncoderOutput enc = encode(m, {2, 4, 1, 6, 3});
  Rng rng(9);
  const Vector h = random_vec(4, rng);
  AttnStep a = attend(m, enc.annotations, h, 2);

  const Matrix& W = m.store.at("attn_W").value;
  Vector s(5);
  for (Index i = 0; i < 5; ++i)
    s[i] = h.dot(W * enc.annotations.row(i).transpose());
  double mx = s.maxCoeff();
  Vector e = (s.array() - mx).exp();
  Vector alpha = e / e.sum();
  Vector c = Vector::Zero(4 + 0);
  c = Vector::Zero(4);
  for (Index i = 0; i < 5; ++i)
    c += alpha[i] * enc.annotations.row(i).transpose();
  double asum = 0.0;
  for (Index i = 0; i < 5; ++i) {
    CHECK(a.alpha[i] == doctest::Approx(alpha[i]).epsilon(1e-12));
    asum += a.alpha[i];
  }
  CHECK(asum == doctest::Approx(1.0).epsilon(1e-9));
  for (Index i = 0; i < 4; ++i)
    CHECK(a.c[i] == doctest::Approx(c[i]).epsilon(1e-12));
}

TEST_CASE("monotonic local attention centers an exact-1 truncated-normal "
          "factor on the aligned position") {
  Seq2SeqConfig cfg = toy_config();
  cfg.mode = AttnMode::local_monotonic;
  cfg.D = 2;
  Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 47);
  EncoderOutput enc = encode(m, {1, 2, 3, 4, 5});
  Rng rng(5);
  AttnStep a = attend(m, enc.annotations, random_vec(4, rng), 2);
  CHECK(a.lo == 1);   // ceil(2 - 2) clipped to 1
  CHECK(a.hi == 4);   // floor(2 + 2)
  CHECK(a.p == 2.0);
  CHECK(a.gauss[2 - a.lo] == 1.0);  // exp(0) at i = p
  // off-center factors follow exp(-(i-p)^2 / (2 (D/2)^2))
  CHECK(a.gauss[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(a.gauss[3 - a.lo] == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("a covering window without the truncated-normal factor equals "
          "global attention bit for bit") {
  Seq2SeqConfig g = toy_config();
  g.score = ScoreKind::general;
  Seq2SeqConfig l = g;
  l.mode = AttnMode::local_monotonic;
  l.D = 6;  // window [1, T_x] at every step we probe
  l.gaussian = false;
  // identical parameter layout + same seed -> identical parameters
  Seq2Seq mg = make_seq2seq(g, 6, 4, 4, 3, 53);
  Seq2Seq ml = make_seq2seq(l, 6, 4, 4, 3, 53);
  EncoderOutput enc = encode(mg, {3, 1, 4, 1, 5});
  Rng rng(21);
  for (Index step = 1; step <= 2; ++step) {
    const Vector h = random_vec(4, rng);
    AttnStep ag = attend(mg, enc.annotations, h, step);
    AttnStep al = attend(ml, enc.annotations, h, step);
    REQUIRE(al.lo == 1);
    REQUIRE(al.hi == 5);
    for (Index w = 0; w < 5; ++w) CHECK(ag.alpha[w] == al.alpha[w]);
    for (Index i = 0; i < 4; ++i) CHECK(ag.c[i] == al.c[i]);
  }
}

TEST_CASE("predictive local attention matches a direct oracle with boundary "
          "clipping on a seven-token source") {
  Seq2SeqConfig cfg = toy_config();
  cfg.mode = AttnMode::local_predictive;
  cfg.D = 2;
  Seq2Seq m = make_seq2seq(cfg, 8, 4, 4, 3, 59);
  EncoderOutput enc = encode(m, {7, 2, 5, 1, 8, 3, 6});
  Rng rng(13);
  const Vector h = random_vec(4, rng, 2.0);
  AttnStep a = attend(m, enc.annotations, h, 1);

  const Matrix& Wp = m.store.at("attn_Wp").value;
  const Matrix& vp = m.store.at("attn_vp").value;
  const double p = 7.0 / (1.0 + std::exp(-vp.row(0).dot(
                                    (Wp * h).array().tanh().matrix())));
  CHECK(a.p == doctest::Approx(p).epsilon(1e-12));
  CHECK(a.p > 0.0);
  CHECK(a.p < 7.0);
  const Index lo = std::max<Index>(1, static_cast<Index>(std::ceil(p - 2)));
  const Index hi = std::min<Index>(7, static_cast<Index>(std::floor(p + 2)));
  REQUIRE(a.lo == lo);
  REQUIRE(a.hi == hi);
  const Index win = hi - lo + 1;
  Vector s(win);
  for (Index w = 0; w < win; ++w)
    s[w] = h.dot(enc.annotations.row(lo - 1 + w).transpose());
  Vector e = (s.array() - s.maxCoeff()).exp();
  Vector sm = e / e.sum();
  double total = 0.0;
  for (Index w = 0; w < win; ++w) {
    const double d = static_cast<double>(lo + w) - p;
    const double gauss = std::exp(-d * d / (2.0 * 1.0 * 1.0));  // sigma=D/2=1
    CHECK(a.alpha[w] == doctest::Approx(sm[w] * gauss).epsilon(1e-12));
    total += a.alpha[w];
  }
  // Eq. 22 applied literally: the product is NOT renormalized
  CHECK(total < 1.0 + 1e-12);
}

TEST_CASE("decode_step emits a probability vector and a zero combiner gives "
          "the uniform distribution") {
  Seq2Seq m = make_seq2seq(toy_config(), 5, 4, 4, 3, 61);
  EncoderOutput enc = encode(m, {1, 3, 5});
  DecodeState st = initial_state(m, enc);
  ProbVector dist = decode_step(m, enc, m.bos, st);
  CHECK(is_prob_vector(dist));
  CHECK(dist.size() == 4);

  m.store.at("attn_Wc").value.setZero();
  DecodeState st2 = initial_state(m, enc);
  ProbVector uniform = decode_step(m, enc, m.bos, st2);
  for (Index j = 0; j < 4; ++j)
    CHECK(uniform[j] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("a fixed-seed decode step matches a straight-line oracle") {
  Seq2SeqConfig cfg = toy_config();
  cfg.score = ScoreKind::general;
  Seq2Seq m = make_seq2seq(cfg, 5, 4, 4, 3, 67);
  EncoderOutput enc = encode(m, {2, 4, 1});
  DecodeState st = initial_state(m, enc);
  ProbVector dist = decode_step(m, enc, 2, st);

  const Vector x = m.store.at("tgt_embedding").value.row(2).transpose();
  const Vector h = gru_step(m.dec.cells[0], x, enc.h0[0]);
  const Matrix& W = m.store.at("attn_W").value;
  Vector s(3);
  for (Index i = 0; i < 3; ++i)
    s[i] = h.dot(W * enc.annotations.row(i).transpose());
  Vector e = (s.array() - s.maxCoeff()).exp();
  Vector alpha = e / e.sum();
  Vector c = Vector::Zero(4);
  for (Index i = 0; i < 3; ++i)
    c += alpha[i] * enc.annotations.row(i).transpose();
  Vector hcat(8);
  hcat << c, h;
  const Vector htilde =
      (m.store.at("attn_Wc").value * hcat).array().tanh();
  const Vector logits = m.store.at("head_Ws").value * htilde;
  Vector el = (logits.array() - logits.maxCoeff()).exp();
  Vector ref = el / el.sum();
  for (Index j = 0; j < 4; ++j)
    CHECK(dist[j] == doctest::Approx(ref[j]).epsilon(1e-12));
}

TEST_CASE("teacher-forced loss equals the chained per-step conditionals and "
          "its likelihood sums to one over the sequence space") {
  Seq2SeqConfig cfg = toy_config();
  cfg.H = 3;
  Seq2Seq m = make_seq2seq(cfg, 4, 3, 3, 2, 71);
  const std::vector<int> src{1, 4, 2};
  EncoderOutput enc = encode(m, src);

  double total = 0.0;
  for (int y1 = 1; y1 <= 3; ++y1) {
    for (int y2 = 1; y2 <= 3; ++y2) {
      DecodeState st = initial_state(m, enc);
      const ProbVector p1 = decode_step(m, enc, m.bos, st);
      const ProbVector p2 = decode_step(m, enc, y1, st);
      const double oracle =
          -(std::log(p1[y1 - 1]) + std::log(p2[y2 - 1])) / 2.0;
      const double loss = seq2seq_loss(m, src, {y1, y2});
      CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(loss >= 0.0);
      total += std::exp(-2.0 * loss);
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a single-token target vocabulary has zero loss") {
  Seq2SeqConfig cfg = toy_config();
  Seq2Seq m = make_seq2seq(cfg, 3, 1, 1, 1, 73);
  CHECK(seq2seq_loss(m, {1, 2}, {1, 1}) == 0.0);
}

TEST_CASE("end-to-end gradients match finite differences across modes, "
          "scores, directions, and cell kinds") {
  struct Combo {
    AttnMode mode;
    ScoreKind score;
    bool bi;
    CellKind kind;
    Index depth;
    int seed;  // chosen so no true gradient sits at the fd noise floor
  };
  const Combo combos[] = {
      {AttnMode::global, ScoreKind::dot, false, CellKind::gru, 1, 400},
      {AttnMode::global, ScoreKind::general, true, CellKind::gru, 1, 401},
      {AttnMode::global, ScoreKind::concat, false, CellKind::lstm, 1, 401},
      {AttnMode::local_monotonic, ScoreKind::general, true, CellKind::rnn, 1,
       400},
      {AttnMode::local_predictive, ScoreKind::dot, false, CellKind::gru, 1,
       402},
      {AttnMode::local_predictive, ScoreKind::concat, true, CellKind::lstm, 1,
       402},
      {AttnMode::global, ScoreKind::general, false, CellKind::gru, 2, 401},
  };
  for (const Combo& combo : combos) {
    CAPTURE(to_string(combo.mode));
    CAPTURE(to_string(combo.score));
    CAPTURE(combo.bi);
    CAPTURE(to_string(combo.kind));
    Seq2SeqConfig cfg;
    cfg.H = 4;
    cfg.d = 3;
    cfg.depth = combo.depth;
    cfg.kind = combo.kind;
    cfg.bidirectional = combo.bi;
    cfg.mode = combo.mode;
    cfg.score = combo.score;
    cfg.D = 1;
    Seq2Seq m = make_seq2seq(cfg, 5, 4, 4, 3, combo.seed);
    const std::vector<int> src{1, 2, 3, 4};  // T_x = 4
    const std::vector<int> tgt{2, 1, 3};     // T_y = 3
    // a second pair keeps every coordinate's gradient away from the
    // finite-difference noise floor
    const std::vector<int> src2{5, 3, 1, 2};
    const std::vector<int> tgt2{1, 4, 2};
    auto loss_fn = [&](bool with_grad) {
      Seq2SeqForward fwd = seq2seq_forward(m, src, tgt);
      Seq2SeqForward fwd2 = seq2seq_forward(m, src2, tgt2);
      if (with_grad) {
        seq2seq_backward(m, fwd, tgt);
        seq2seq_backward(m, fwd2, tgt2);
      }
      return fwd.loss + fwd2.loss;
    };
    GradCheckResult res = grad_check(m.store, loss_fn);
    INFO(res.report());
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("alignment vectors are a convex combination at every step for "
          "every score kind") {
  for (ScoreKind kind :
       {ScoreKind::dot, ScoreKind::general, ScoreKind::concat}) {
    CAPTURE(to_string(kind));
    Seq2SeqConfig cfg = toy_config();
    cfg.score = kind;
    Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 211);
    EncoderOutput enc = encode(m, {5, 2, 6, 1});
    DecodeState st = initial_state(m, enc);
    int prev = m.bos;
    for (int t = 0; t < 4; ++t) {
      AttnStep a;
      ProbVector dist = decode_step(m, enc, prev, st, &a);
      double sum = 0.0;
      Vector recon = Vector::Zero(4);
      for (Index w = 0; w < a.alpha.size(); ++w) {
        CHECK(a.alpha[w] >= 0.0);
        sum += a.alpha[w];
        recon += a.alpha[w] * enc.annotations.row(a.lo - 1 + w).transpose();
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      for (Index i = 0; i < 4; ++i) CHECK(std::abs(recon[i] - a.c[i]) < 1e-9);
      int best = 0;
      dist.maxCoeff(&best);
      prev = best + 1;
    }
  }
}

TEST_CASE("the predicted window center always falls strictly inside the "
          "source sentence") {
  Seq2SeqConfig cfg = toy_config();
  cfg.mode = AttnMode::local_predictive;
  cfg.D = 1;
  Seq2Seq m = make_seq2seq(cfg, 6, 4, 4, 3, 223);
  EncoderOutput enc = encode(m, {1, 2, 3, 4, 5, 1});
  Rng rng(17);
  for (int rep = 0; rep < 25; ++rep) {
    AttnStep a = attend(m, enc.annotations, random_vec(4, rng, 20.0), 1);
    CHECK(a.p > 0.0);
    CHECK(a.p < 6.0);
  }
}

TEST_CASE("beam width one is greedy decoding") {
  Seq2SeqConfig cfg = toy_config();
  Seq2Seq m = make_seq2seq(cfg, 5, 4, 4, 3, 227);
  const std::vector<int> src{2, 5, 1};
  EncoderOutput enc = encode(m, src);

  std::vector<int> greedy;
  DecodeState st = initial_state(m, enc);
  int prev = m.bos;
  for (int t = 0; t < 8; ++t) {
    const ProbVector dist = decode_step(m, enc, prev, st);
    int best = 0;
    dist.maxCoeff(&best);
    greedy.push_back(best + 1);
    if (greedy.back() == m.eos) break;
    prev = greedy.back();
  }

  const auto hyps = beam_search(m, enc, 1, 8);
  REQUIRE(!hyps.empty());
  REQUIRE(hyps[0].tokens.size() == greedy.size());
  for (std::size_t i = 0; i < greedy.size(); ++i)
    CHECK(hyps[0].tokens[i] == greedy[i]);
}

TEST_CASE("accumulated scores re-derive from per-step conditionals and never "
          "increase along a hypothesis") {
  Seq2Seq m = make_seq2seq(toy_config(), 5, 4, 4, 3, 229);
  EncoderOutput enc = encode(m, {4, 1, 3});
  const auto hyps = beam_search(m, enc, 3, 5);
  for (const auto& hyp : hyps) {
    CHECK(hyp.logprob <= 0.0);
    DecodeState st = initial_state(m, enc);
    int prev = m.bos;
    double lp = 0.0;
    for (int tok : hyp.tokens) {
      const ProbVector dist = decode_step(m, enc, prev, st);
      const double step_lp = std::log(dist[tok - 1]);
      CHECK(step_lp <= 0.0);  // appending a token can only lower the score
      lp += step_lp;
      prev = tok;
    }
    CHECK(lp == doctest::Approx(hyp.logprob).epsilon(1e-12));
  }
}

TEST_CASE("an exhaustive beam matches brute-force enumeration on twenty "
          "random toy models") {
  for (int seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    Seq2SeqConfig cfg;
    cfg.H = 3;
    cfg.d = 2;
    cfg.kind = CellKind::gru;
    Seq2Seq m = make_seq2seq(cfg, 4, 3, 3, 2, 1000 + seed);
    const std::vector<int> src{1, 3, 2};
    EncoderOutput enc = encode(m, src);

    double best_lp = -1e300;
    std::vector<int> best_tokens, prefix;
    enumerate_paths(m, enc, initial_state(m, enc), m.bos, prefix, 0.0, 3,
                    best_lp, best_tokens);

    const auto hyps = beam_search(m, enc, 27, 3);  // K = V^max_len
    REQUIRE(!hyps.empty());
    CHECK(hyps[0].logprob == doctest::Approx(best_lp).epsilon(1e-12));
    REQUIRE(hyps[0].tokens.size() == best_tokens.size());
    for (std::size_t i = 0; i < best_tokens.size(); ++i)
      CHECK(hyps[0].tokens[i] == best_tokens[i]);

    // widening the beam never loses the champion
    double prev_best = -1e300;
    for (Index K : {1, 2, 3, 27}) {
      const auto h = beam_search(m, enc, K, 3);
      CHECK(h[0].logprob >= prev_best - 1e-12);
      prev_best = h[0].logprob;
    }
  }
}

TEST_CASE("translation writes a parseable attention trace") {
  Seq2Seq m = make_seq2seq(toy_config(), 5, 4, 4, 3, 233);
  std::vector<AttnStep> trace;
  const std::vector<int> out = translate(m, {2, 4, 1}, 2, 5, &trace);
  REQUIRE(!out.empty());
  REQUIRE(trace.size() == out.size());

  const std::string path = "attn_trace_test.csv";
  write_attention_csv(path, trace);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,source_position,weight");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string step, pos, w;
    REQUIRE(std::getline(ss, step, ','));
    REQUIRE(std::getline(ss, pos, ','));
    REQUIRE(std::getline(ss, w, ','));
    const int s = std::stoi(step);
    const int p = std::stoi(pos);
    REQUIRE(s >= 1);
    REQUIRE(s <= static_cast<int>(trace.size()));
    REQUIRE(p >= 1);
    REQUIRE(p <= 3);
    CHECK(std::stod(w) ==
          doctest::Approx(trace[s - 1].alpha[p - trace[s - 1].lo])
              .epsilon(1e-15));
    ++rows;
  }
  CHECK(rows == trace.size() * 3);  // global mode covers all three positions
  std::remove(path.c_str());
}

}  // TEST_SUITE
