#include <ntx/seq2seq.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ntx {
namespace {

void check_tokens(const std::vector<int>& seq, Index vocab,
                  const char* side) {
  require(!seq.empty(), std::string(side) + " sequence is empty");
  for (int idx : seq)
    require(idx >= 1 && idx <= static_cast<int>(vocab),
            std::string(side) + " token index " + std::to_string(idx) +
                " outside [1, " + std::to_string(vocab) + "]");
}

Vector embed_row(const ParamStore& store, const char* name, int index) {
  return store.at(name).value.row(index).transpose();
}

Vector vstack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

}  // namespace

AttnMode attn_mode_from_string(const std::string& s) {
  if (s == "global") return AttnMode::global;
  if (s == "local-m" || s == "local_monotonic") return AttnMode::local_monotonic;
  if (s == "local-p" || s == "local_predictive") return AttnMode::local_predictive;
  throw ConfigError("unknown attention mode '" + s +
                    "' (want global|local-m|local-p)");
}

ScoreKind score_kind_from_string(const std::string& s) {
  if (s == "dot") return ScoreKind::dot;
  if (s == "general") return ScoreKind::general;
  if (s == "concat") return ScoreKind::concat;
  throw ConfigError("unknown score kind '" + s +
                    "' (want dot|general|concat)");
}

const char* to_string(AttnMode m) {
  switch (m) {
    case AttnMode::global: return "global";
    case AttnMode::local_monotonic: return "local-m";
    case AttnMode::local_predictive: return "local-p";
  }
  return "?";
}

const char* to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::dot: return "dot";
    case ScoreKind::general: return "general";
    case ScoreKind::concat: return "concat";
  }
  return "?";
}

Seq2Seq make_seq2seq(const Seq2SeqConfig& cfg, Index src_vocab,
                     Index tgt_vocab, int tgt_bos, int tgt_eos,
                     std::uint64_t seed) {
  require(src_vocab >= 1 && tgt_vocab >= 1,
          "translation model: both vocabularies must be non-empty");
  require(tgt_bos >= 1 && tgt_bos <= static_cast<int>(tgt_vocab),
          "translation model: <bos> outside the target vocabulary");
  require(tgt_eos >= 1 && tgt_eos <= static_cast<int>(tgt_vocab),
          "translation model: <eos> outside the target vocabulary");
  require(cfg.H >= 1 && cfg.d >= 1 && cfg.depth >= 1,
          "translation model: bad dimensions");
  require(cfg.D >= 0, "translation model: window half-width must be >= 0");
  Seq2Seq m;
  m.cfg = cfg;
  m.src_vocab = src_vocab;
  m.tgt_vocab = tgt_vocab;
  m.bos = tgt_bos;
  m.eos = tgt_eos;
  if (cfg.score == ScoreKind::dot && m.H_enc() != cfg.H)
    throw ConfigError(
        "dot attention needs matching encoder/decoder widths; a "
        "bidirectional encoder doubles the annotation width — use the "
        "general or concat score instead");

  m.store.add("src_embedding", src_vocab + 1, cfg.d, InitKind::glorot, true,
              /*mask_row0=*/true);
  m.store.add("tgt_embedding", tgt_vocab + 1, cfg.d, InitKind::glorot, true,
              /*mask_row0=*/true);
  m.enc_f = make_stack(m.store, cfg.kind, "enc_", cfg.d, cfg.H, cfg.depth);
  if (cfg.bidirectional) {
    m.enc_b = make_stack(m.store, cfg.kind, "encb_", cfg.d, cfg.H, cfg.depth);
    m.store.add("init_Wh", cfg.H, 2 * cfg.H, InitKind::glorot);
    if (cfg.kind == CellKind::lstm)
      m.store.add("init_Wc", cfg.H, 2 * cfg.H, InitKind::glorot);
  }
  m.dec = make_stack(m.store, cfg.kind, "dec_", cfg.d, cfg.H, cfg.depth);
  if (cfg.score == ScoreKind::general)
    m.store.add("attn_W", cfg.H, m.H_enc(), InitKind::glorot);
  if (cfg.score == ScoreKind::concat) {
    m.store.add("attn_Wa", cfg.H, cfg.H + m.H_enc(), InitKind::glorot);
    m.store.add("attn_v", 1, cfg.H, InitKind::glorot);
  }
  if (cfg.mode == AttnMode::local_predictive) {
    m.store.add("attn_Wp", cfg.H, cfg.H, InitKind::glorot);
    m.store.add("attn_vp", 1, cfg.H, InitKind::glorot);
  }
  m.store.add("attn_Wc", cfg.H, m.H_enc() + cfg.H, InitKind::glorot);
  m.store.add("head_Ws", tgt_vocab, cfg.H, InitKind::glorot);
  init(m.store, seed);
  return m;
}

EncoderOutput encode(const Seq2Seq& model, const std::vector<int>& source) {
  check_tokens(source, model.src_vocab, "source");
  const Index T = static_cast<Index>(source.size());
  const Index H = model.cfg.H;
  EncoderOutput out;
  out.src = source;
  out.inputs_f.reserve(source.size());
  for (int idx : source)
    out.inputs_f.push_back(embed_row(model.store, "src_embedding", idx));
  out.fwd = run_sequence(model.enc_f, out.inputs_f);

  out.annotations.resize(T, model.H_enc());
  if (model.cfg.bidirectional) {
    out.inputs_b.reserve(source.size());
    for (Index k = 0; k < T; ++k)
      out.inputs_b.push_back(
          embed_row(model.store, "src_embedding", source[T - 1 - k]));
    out.bwd = run_sequence(model.enc_b, out.inputs_b);
    for (Index t = 0; t < T; ++t) {
      out.annotations.row(t).head(H) = out.fwd.top_h.row(t);
      out.annotations.row(t).tail(H) = out.bwd.top_h.row(T - 1 - t);
    }
  } else {
    out.annotations = out.fwd.top_h;
  }

  const Index depth = model.cfg.depth;
  out.h0.resize(depth);
  out.c0.assign(depth, Vector::Zero(H));
  for (Index l = 0; l < depth; ++l) {
    if (model.cfg.bidirectional) {
      const Vector cat = vstack(out.fwd.final_h[l], out.bwd.final_h[l]);
      out.h0[l] = model.store.at("init_Wh").value * cat;
      if (model.cfg.kind == CellKind::lstm) {
        const Vector ccat = vstack(out.fwd.final_c[l], out.bwd.final_c[l]);
        out.c0[l] = model.store.at("init_Wc").value * ccat;
      }
    } else {
      out.h0[l] = out.fwd.final_h[l];
      if (model.cfg.kind == CellKind::lstm) out.c0[l] = out.fwd.final_c[l];
    }
  }
  return out;
}

double score(const Seq2Seq& model, ScoreKind kind, const Vector& h_t,
             const Vector& h_bar) {
  switch (kind) {
    case ScoreKind::dot:
      if (h_t.size() != h_bar.size())
        throw ConfigError("dot score needs equal state/annotation widths");
      return h_t.dot(h_bar);
    case ScoreKind::general: {
      const Matrix& W = model.store.at("attn_W").value;
      require(W.rows() == h_t.size() && W.cols() == h_bar.size(),
              "general score: weight shape mismatch");
      return h_t.dot(W * h_bar);
    }
    case ScoreKind::concat: {
      const Matrix& Wa = model.store.at("attn_Wa").value;
      const Matrix& v = model.store.at("attn_v").value;
      require(Wa.cols() == h_t.size() + h_bar.size(),
              "concat score: weight shape mismatch");
      const Vector u = (Wa * vstack(h_t, h_bar)).array().tanh();
      return v.row(0).dot(u);
    }
  }
  throw ConfigError("unreachable score kind");
}

AttnStep attend(const Seq2Seq& model, const Matrix& annotations,
                const Vector& h_t, Index step) {
  const Index T_x = annotations.rows();
  require(T_x >= 1, "attention: no annotations");
  require(step >= 1, "attention: decoder step must be 1-based");
  AttnStep a;
  // window center
  bool local = model.cfg.mode != AttnMode::global;
  if (model.cfg.mode == AttnMode::local_monotonic) {
    a.p = static_cast<double>(step);
  } else if (model.cfg.mode == AttnMode::local_predictive) {
    a.predictive = true;
    a.wp_h = model.store.at("attn_Wp").value * h_t;
    a.tanh_wp_h = a.wp_h.array().tanh();
    const double arg = model.store.at("attn_vp").value.row(0).dot(a.tanh_wp_h);
    a.sig = sigmoid(arg);
    a.p = static_cast<double>(T_x) * a.sig;  // in (0, T_x)
  }
  // window bounds (1-based, inclusive)
  if (local) {
    const double D = static_cast<double>(model.cfg.D);
    a.lo = std::max<Index>(1, static_cast<Index>(std::ceil(a.p - D)));
    a.hi = std::min<Index>(T_x, static_cast<Index>(std::floor(a.p + D)));
    if (a.lo > a.hi) {  // degenerate window: nearest valid position
      Index pos = static_cast<Index>(std::lround(a.p));
      pos = std::max<Index>(1, std::min<Index>(T_x, pos));
      a.lo = a.hi = pos;
    }
  } else {
    a.lo = 1;
    a.hi = T_x;
  }
  const Index win = a.hi - a.lo + 1;

  a.scores.resize(win);
  if (model.cfg.score == ScoreKind::concat)
    a.concat_u.resize(win, model.cfg.H);
  for (Index w = 0; w < win; ++w) {
    const Vector ann = annotations.row(a.lo - 1 + w).transpose();
    switch (model.cfg.score) {
      case ScoreKind::dot:
        a.scores[w] = h_t.dot(ann);
        break;
      case ScoreKind::general:
        a.scores[w] = h_t.dot(model.store.at("attn_W").value * ann);
        break;
      case ScoreKind::concat: {
        const Vector u = (model.store.at("attn_Wa").value * vstack(h_t, ann))
                             .array()
                             .tanh();
        a.concat_u.row(w) = u.transpose();
        a.scores[w] = model.store.at("attn_v").value.row(0).dot(u);
        break;
      }
    }
  }
  a.sm = softmax(a.scores);
  a.gauss = Vector::Ones(win);
  if (local && model.cfg.gaussian && model.cfg.D > 0) {
    const double sigma = static_cast<double>(model.cfg.D) / 2.0;
    for (Index w = 0; w < win; ++w) {
      const double d = static_cast<double>(a.lo + w) - a.p;
      a.gauss[w] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    }
  }
  a.alpha = a.sm.cwiseProduct(a.gauss);
  a.c = Vector::Zero(annotations.cols());
  for (Index w = 0; w < win; ++w)
    a.c += a.alpha[w] * annotations.row(a.lo - 1 + w).transpose();
  return a;
}

void attend_backward(Seq2Seq& model, const Matrix& annotations,
                     const Vector& h_t, const AttnStep& cache,
                     const Vector& dc, Vector& dh_t, Matrix& dannotations) {
  const Index win = cache.hi - cache.lo + 1;
  Vector dalpha(win), dm(win), dg(win);
  for (Index w = 0; w < win; ++w) {
    const auto ann = annotations.row(cache.lo - 1 + w);
    dalpha[w] = dc.dot(ann.transpose());
    dannotations.row(cache.lo - 1 + w) += cache.alpha[w] * dc.transpose();
  }
  dm = dalpha.cwiseProduct(cache.gauss);
  dg = dalpha.cwiseProduct(cache.sm);
  // softmax backward
  const double dot_ms = dm.dot(cache.sm);
  Vector dscores =
      cache.sm.cwiseProduct(dm - Vector::Constant(win, dot_ms));
  // score backward
  for (Index w = 0; w < win; ++w) {
    const Vector ann = annotations.row(cache.lo - 1 + w).transpose();
    const double ds = dscores[w];
    switch (model.cfg.score) {
      case ScoreKind::dot:
        dh_t += ds * ann;
        dannotations.row(cache.lo - 1 + w) += ds * h_t.transpose();
        break;
      case ScoreKind::general: {
        Param& W = model.store.at("attn_W");
        W.grad += ds * h_t * ann.transpose();
        dh_t += ds * (W.value * ann);
        dannotations.row(cache.lo - 1 + w) +=
            ds * (W.value.transpose() * h_t).transpose();
        break;
      }
      case ScoreKind::concat: {
        Param& Wa = model.store.at("attn_Wa");
        Param& v = model.store.at("attn_v");
        const Vector u = cache.concat_u.row(w).transpose();
        v.grad.row(0) += ds * u.transpose();
        const Vector dpre = (ds * v.value.row(0).transpose())
                                .cwiseProduct(Vector::Ones(u.size()) -
                                              u.cwiseProduct(u));
        const Vector z = vstack(h_t, ann);
        Wa.grad += dpre * z.transpose();
        const Vector dz = Wa.value.transpose() * dpre;
        dh_t += dz.head(h_t.size());
        dannotations.row(cache.lo - 1 + w) +=
            dz.tail(ann.size()).transpose();
        break;
      }
    }
  }
  // position backward (only the differentiable Eq. 22 path)
  if (cache.predictive && model.cfg.gaussian && model.cfg.D > 0) {
    const double sigma = static_cast<double>(model.cfg.D) / 2.0;
    double dp = 0.0;
    for (Index w = 0; w < win; ++w) {
      const double d = static_cast<double>(cache.lo + w) - cache.p;
      dp += dg[w] * cache.gauss[w] * d / (sigma * sigma);
    }
    const double T_x = static_cast<double>(annotations.rows());
    const double darg = dp * T_x * cache.sig * (1.0 - cache.sig);
    Param& Wp = model.store.at("attn_Wp");
    Param& vp = model.store.at("attn_vp");
    vp.grad.row(0) += darg * cache.tanh_wp_h.transpose();
    const Vector dwph =
        (darg * vp.value.row(0).transpose())
            .cwiseProduct(Vector::Ones(cache.wp_h.size()) -
                          cache.tanh_wp_h.cwiseProduct(cache.tanh_wp_h));
    Wp.grad += dwph * h_t.transpose();
    dh_t += Wp.value.transpose() * dwph;
  }
}

DecodeState initial_state(const Seq2Seq& model, const EncoderOutput& enc) {
  require(static_cast<Index>(enc.h0.size()) == model.cfg.depth,
          "decode: encoder output does not match the decoder depth");
  DecodeState s;
  s.h = enc.h0;
  s.c = enc.c0;
  s.t = 0;
  return s;
}

ProbVector decode_step(const Seq2Seq& model, const EncoderOutput& enc,
                       int y_prev, DecodeState& state, AttnStep* attn) {
  require(y_prev >= 1 && y_prev <= static_cast<int>(model.tgt_vocab),
          "decode: token index outside the target vocabulary");
  Vector x = embed_row(model.store, "tgt_embedding", y_prev);
  for (Index l = 0; l < model.cfg.depth; ++l) {
    cell_step(model.dec.cells[l], x, state.h[l], state.c[l]);
    x = state.h[l];
  }
  state.t += 1;
  AttnStep a = attend(model, enc.annotations, state.h[model.cfg.depth - 1],
                      state.t);
  const Vector hcat = vstack(a.c, state.h[model.cfg.depth - 1]);
  const Vector htilde =
      (model.store.at("attn_Wc").value * hcat).array().tanh();
  const Vector logits = model.store.at("head_Ws").value * htilde;
  if (attn) *attn = std::move(a);
  return softmax(logits);
}

Seq2SeqForward seq2seq_forward(const Seq2Seq& model,
                               const std::vector<int>& source,
                               const std::vector<int>& target) {
  check_tokens(target, model.tgt_vocab, "target");
  Seq2SeqForward fwd;
  fwd.enc = encode(model, source);
  const Index T_y = static_cast<Index>(target.size());
  fwd.fed.push_back(model.bos);
  for (Index t = 0; t + 1 < T_y; ++t) fwd.fed.push_back(target[t]);
  for (int idx : fwd.fed)
    fwd.dec_inputs.push_back(embed_row(model.store, "tgt_embedding", idx));
  fwd.dec_seq = run_sequence(model.dec, fwd.dec_inputs, &fwd.enc.h0,
                             &fwd.enc.c0);
  const Index H = model.cfg.H;
  fwd.attn.resize(T_y);
  fwd.hcat.resize(T_y, model.H_enc() + H);
  fwd.htilde.resize(T_y, H);
  fwd.probs.resize(T_y, model.tgt_vocab);
  double nll = 0.0;
  const Matrix& Wc = model.store.at("attn_Wc").value;
  const Matrix& Ws = model.store.at("head_Ws").value;
  for (Index t = 0; t < T_y; ++t) {
    const Vector h_top = fwd.dec_seq.top_h.row(t).transpose();
    fwd.attn[t] = attend(model, fwd.enc.annotations, h_top, t + 1);
    fwd.hcat.row(t) = vstack(fwd.attn[t].c, h_top).transpose();
    fwd.htilde.row(t) =
        (Wc * fwd.hcat.row(t).transpose()).array().tanh().transpose();
    const Vector logits = Ws * fwd.htilde.row(t).transpose();
    fwd.probs.row(t) = softmax(logits).transpose();
    nll -= log_softmax(logits)[target[t] - 1];
  }
  fwd.loss = nll / static_cast<double>(T_y);
  return fwd;
}

double seq2seq_loss(const Seq2Seq& model, const std::vector<int>& source,
                    const std::vector<int>& target) {
  return seq2seq_forward(model, source, target).loss;
}

void seq2seq_backward(Seq2Seq& model, const Seq2SeqForward& fwd,
                      const std::vector<int>& target) {
  const Index T_y = static_cast<Index>(target.size());
  require(fwd.probs.rows() == T_y,
          "translation backward: forward/target length mismatch");
  const Index T_x = fwd.enc.annotations.rows();
  const Index H = model.cfg.H;
  const Index He = model.H_enc();
  const Index depth = model.cfg.depth;
  const double scale = 1.0 / static_cast<double>(T_y);

  Param& Wc = model.store.at("attn_Wc");
  Param& Ws = model.store.at("head_Ws");
  Matrix dann = Matrix::Zero(T_x, He);
  std::vector<Vector> dtop(T_y);
  for (Index t = 0; t < T_y; ++t) {
    Vector dlogits = fwd.probs.row(t).transpose() * scale;
    dlogits[target[t] - 1] -= scale;
    Ws.grad += dlogits * fwd.htilde.row(t);
    Vector dhtilde = Ws.value.transpose() * dlogits;
    const Vector ht = fwd.htilde.row(t).transpose();
    const Vector dpre =
        dhtilde.cwiseProduct(Vector::Ones(H) - ht.cwiseProduct(ht));
    Wc.grad += dpre * fwd.hcat.row(t);
    const Vector dhcat = Wc.value.transpose() * dpre;
    const Vector dc = dhcat.head(He);
    Vector dh_t = dhcat.tail(H);
    const Vector h_top = fwd.dec_seq.top_h.row(t).transpose();
    attend_backward(model, fwd.enc.annotations, h_top, fwd.attn[t], dc, dh_t,
                    dann);
    dtop[t] = dh_t;
  }

  std::vector<Vector> dh0, dc0;
  const std::vector<Vector> dec_din = sequence_backward(
      model.dec, fwd.dec_seq, dtop, nullptr, nullptr, &dh0, &dc0);
  Param& tgt_emb = model.store.at("tgt_embedding");
  for (std::size_t t = 0; t < fwd.fed.size(); ++t)
    tgt_emb.grad.row(fwd.fed[t]) += dec_din[t].transpose();

  // initial-state projection
  std::vector<Vector> dfin_fh(depth), dfin_fc(depth), dfin_bh(depth),
      dfin_bc(depth);
  const bool lstm = model.cfg.kind == CellKind::lstm;
  for (Index l = 0; l < depth; ++l) {
    if (model.cfg.bidirectional) {
      Param& Wh = model.store.at("init_Wh");
      const Vector cat =
          vstack(fwd.enc.fwd.final_h[l], fwd.enc.bwd.final_h[l]);
      Wh.grad += dh0[l] * cat.transpose();
      const Vector dcat = Wh.value.transpose() * dh0[l];
      dfin_fh[l] = dcat.head(H);
      dfin_bh[l] = dcat.tail(H);
      if (lstm) {
        Param& Wcs = model.store.at("init_Wc");
        const Vector ccat =
            vstack(fwd.enc.fwd.final_c[l], fwd.enc.bwd.final_c[l]);
        Wcs.grad += dc0[l] * ccat.transpose();
        const Vector dccat = Wcs.value.transpose() * dc0[l];
        dfin_fc[l] = dccat.head(H);
        dfin_bc[l] = dccat.tail(H);
      }
    } else {
      dfin_fh[l] = dh0[l];
      if (lstm) dfin_fc[l] = dc0[l];
    }
  }

  // encoder backward
  Param& src_emb = model.store.at("src_embedding");
  std::vector<Vector> dtop_f(T_x);
  for (Index t = 0; t < T_x; ++t)
    dtop_f[t] = dann.row(t).head(H).transpose();
  const std::vector<Vector> din_f =
      sequence_backward(model.enc_f, fwd.enc.fwd, dtop_f, &dfin_fh,
                        lstm ? &dfin_fc : nullptr);
  for (Index t = 0; t < T_x; ++t)
    src_emb.grad.row(fwd.enc.src[t]) += din_f[t].transpose();

  if (model.cfg.bidirectional) {
    std::vector<Vector> dtop_b(T_x);
    for (Index k = 0; k < T_x; ++k)
      dtop_b[k] = dann.row(T_x - 1 - k).tail(H).transpose();
    const std::vector<Vector> din_b =
        sequence_backward(model.enc_b, fwd.enc.bwd, dtop_b, &dfin_bh,
                          lstm ? &dfin_bc : nullptr);
    for (Index k = 0; k < T_x; ++k)
      src_emb.grad.row(fwd.enc.src[T_x - 1 - k]) += din_b[k].transpose();
  }
}

std::vector<BeamHypothesis> beam_search(const Seq2Seq& model,
                                        const EncoderOutput& enc, Index K,
                                        Index max_len, double length_norm) {
  require(K >= 1, "beam search: K must be at least 1");
  require(max_len >= 1, "beam search: max_len must be at least 1");
  std::vector<BeamHypothesis> live(1);
  live[0].state = initial_state(model, enc);
  std::vector<BeamHypothesis> pool;

  for (Index len = 0; len < max_len && !live.empty(); ++len) {
    std::vector<BeamHypothesis> children;
    children.reserve(live.size() * model.tgt_vocab);
    for (const BeamHypothesis& hyp : live) {
      DecodeState st = hyp.state;
      const int y_prev = hyp.tokens.empty() ? model.bos : hyp.tokens.back();
      const ProbVector dist = decode_step(model, enc, y_prev, st);
      for (Index j = 0; j < dist.size(); ++j) {
        BeamHypothesis child = hyp;
        child.state = st;
        child.tokens.push_back(static_cast<int>(j) + 1);
        child.logprob += std::log(std::max(dist[j], 1e-300));
        child.finished = (child.tokens.back() == model.eos);
        children.push_back(std::move(child));
      }
    }
    std::stable_sort(children.begin(), children.end(),
                     [](const BeamHypothesis& a, const BeamHypothesis& b) {
                       return a.logprob > b.logprob;
                     });
    if (static_cast<Index>(children.size()) > K) children.resize(K);
    live.clear();
    for (BeamHypothesis& child : children) {
      if (child.finished)
        pool.push_back(std::move(child));
      else
        live.push_back(std::move(child));
    }
  }
  for (BeamHypothesis& hyp : live) pool.push_back(std::move(hyp));

  auto final_score = [length_norm](const BeamHypothesis& h) {
    if (length_norm <= 0.0) return h.logprob;
    const double len = std::max<double>(1.0, h.tokens.size());
    return h.logprob / std::pow(len, length_norm);
  };
  std::stable_sort(pool.begin(), pool.end(),
                   [&](const BeamHypothesis& a, const BeamHypothesis& b) {
                     return final_score(a) > final_score(b);
                   });
  if (static_cast<Index>(pool.size()) > K) pool.resize(K);
  return pool;
}

std::vector<int> translate(const Seq2Seq& model,
                           const std::vector<int>& source, Index K,
                           Index max_len, std::vector<AttnStep>* trace) {
  const EncoderOutput enc = encode(model, source);
  const auto hyps = beam_search(model, enc, K, max_len);
  require(!hyps.empty(), "beam search returned no hypotheses");
  const std::vector<int>& best = hyps.front().tokens;
  if (trace) {
    trace->clear();
    DecodeState st = initial_state(model, enc);
    int prev = model.bos;
    for (int tok : best) {
      AttnStep a;
      (void)decode_step(model, enc, prev, st, &a);
      trace->push_back(std::move(a));
      prev = tok;
    }
  }
  return best;
}

void write_attention_csv(const std::string& path,
                         const std::vector<AttnStep>& trace) {
  std::ofstream out(path);
  require(out.good(), "cannot write attention trace to '" + path + "'");
  out << "step,source_position,weight\n";
  char buf[64];
  for (std::size_t s = 0; s < trace.size(); ++s) {
    const AttnStep& a = trace[s];
    for (Index w = 0; w <= a.hi - a.lo; ++w) {
      std::snprintf(buf, sizeof(buf), "%.17g", a.alpha[w]);
      out << (s + 1) << ',' << (a.lo + w) << ',' << buf << '\n';
    }
  }
  require(out.good(), "failed while writing '" + path + "'");
}

}  // namespace ntx
