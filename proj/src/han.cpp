#include <ntx/han.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

namespace ntx {
namespace {

BiRun bi_run(const Stack& f, const Stack& b,
             const std::vector<Vector>& inputs) {
  const Index T = static_cast<Index>(inputs.size());
  const Index H = f.H();
  BiRun run;
  run.fwd = run_sequence(f, inputs);
  std::vector<Vector> rev(inputs.rbegin(), inputs.rend());
  run.bwd = run_sequence(b, rev);
  run.ann.resize(T, 2 * H);
  for (Index t = 0; t < T; ++t) {
    run.ann.row(t).head(H) = run.fwd.top_h.row(t);
    run.ann.row(t).tail(H) = run.bwd.top_h.row(T - 1 - t);
  }
  return run;
}

// dann: T x 2H. Returns the gradient at each original input position.
std::vector<Vector> bi_backward(const Stack& f, const Stack& b,
                                const BiRun& run, const Matrix& dann) {
  const Index T = dann.rows();
  const Index H = f.H();
  std::vector<Vector> dtop_f(T), dtop_b(T);
  for (Index t = 0; t < T; ++t) {
    dtop_f[t] = dann.row(t).head(H).transpose();
    dtop_b[t] = dann.row(T - 1 - t).tail(H).transpose();
  }
  const std::vector<Vector> din_f = sequence_backward(f, run.fwd, dtop_f);
  const std::vector<Vector> din_b = sequence_backward(b, run.bwd, dtop_b);
  std::vector<Vector> din(T);
  for (Index t = 0; t < T; ++t) din[t] = din_f[t] + din_b[T - 1 - t];
  return din;
}

}  // namespace

SelfAttentionParams make_self_attention(ParamStore& store,
                                        const std::string& prefix, Index A,
                                        Index H_in, bool bias) {
  require(A >= 1, "self-attention: attention dimension must be positive");
  require(H_in >= 1, "self-attention: annotation width must be positive");
  SelfAttentionParams p;
  p.W = &store.add(prefix + "_W", A, H_in, InitKind::glorot);
  if (bias) p.b = &store.add(prefix + "_b", 1, A, InitKind::zero);
  p.u = &store.add(prefix + "_u", 1, A, InitKind::glorot);
  return p;
}

SelfAttendResult self_attend(const SelfAttentionParams& params,
                             const Matrix& annotations) {
  const Index T = annotations.rows();
  require(T >= 1, "self-attention: no annotations");
  const Index A = params.W->value.rows();
  SelfAttendResult res;
  res.ut.resize(T, A);
  Vector scores(T);
  for (Index t = 0; t < T; ++t) {
    Vector pre = params.W->value * annotations.row(t).transpose();
    if (params.b) pre += params.b->value.row(0).transpose();
    res.ut.row(t) = pre.array().tanh().transpose();
    scores[t] = params.u->value.row(0).dot(res.ut.row(t).transpose());
  }
  res.alpha = softmax(scores);
  res.s = annotations.transpose() * res.alpha;
  return res;
}

Matrix self_attend_backward(const SelfAttentionParams& params,
                            const Matrix& annotations,
                            const SelfAttendResult& cache, const Vector& ds) {
  const Index T = annotations.rows();
  require(ds.size() == annotations.cols(),
          "self-attention backward: pooled gradient width mismatch");
  Matrix dann = Matrix::Zero(T, annotations.cols());
  Vector dalpha(T);
  for (Index t = 0; t < T; ++t) {
    dalpha[t] = ds.dot(annotations.row(t).transpose());
    dann.row(t) += cache.alpha[t] * ds.transpose();
  }
  const double mix = dalpha.dot(cache.alpha);
  const Vector dscores =
      cache.alpha.cwiseProduct(dalpha - Vector::Constant(T, mix));
  for (Index t = 0; t < T; ++t) {
    const Vector ut = cache.ut.row(t).transpose();
    params.u->grad.row(0) += dscores[t] * ut.transpose();
    const Vector dut = dscores[t] * params.u->value.row(0).transpose();
    const Vector dpre =
        dut.cwiseProduct(Vector::Ones(ut.size()) - ut.cwiseProduct(ut));
    params.W->grad += dpre * annotations.row(t);
    if (params.b) params.b->grad.row(0) += dpre.transpose();
    dann.row(t) += (params.W->value.transpose() * dpre).transpose();
  }
  return dann;
}

HanModel make_han(const HanConfig& cfg, Index vocab_size,
                  std::uint64_t seed) {
  require(vocab_size >= 1, "classifier: vocabulary must be non-empty");
  require(cfg.H >= 1 && cfg.d >= 1, "classifier: bad dimensions");
  require(cfg.classes >= 2, "classifier: need at least two classes");
  HanModel m;
  m.cfg = cfg;
  m.vocab = vocab_size;
  const Index A = m.attn_dim();
  m.store.add("embedding", vocab_size + 1, cfg.d, InitKind::glorot, true,
              /*mask_row0=*/true);
  m.word_f = make_stack(m.store, CellKind::gru, "wf_", cfg.d, cfg.H, 1);
  m.word_b = make_stack(m.store, CellKind::gru, "wb_", cfg.d, cfg.H, 1);
  m.word_attn = make_self_attention(m.store, "wattn", A, 2 * cfg.H,
                                    cfg.attention_bias);
  m.sent_f = make_stack(m.store, CellKind::gru, "sf_", 2 * cfg.H, cfg.H, 1);
  m.sent_b = make_stack(m.store, CellKind::gru, "sb_", 2 * cfg.H, cfg.H, 1);
  m.sent_attn = make_self_attention(m.store, "sattn", A, 2 * cfg.H,
                                    cfg.attention_bias);
  m.store.add("head_W", cfg.classes, 2 * cfg.H, InitKind::glorot);
  m.store.add("head_b", 1, cfg.classes, InitKind::zero);
  init(m.store, seed);
  return m;
}

HanForward han_forward(const HanModel& model,
                       const std::vector<std::vector<int>>& sentences,
                       int label) {
  require(!sentences.empty(), "classifier: document has no sentences");
  HanForward fwd;
  const Param& emb = model.store.at("embedding");
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    const std::vector<int>& sent = sentences[si];
    if (sent.empty()) {
      std::cerr << "warning: skipping empty sentence " << si
                << " of the document\n";
      continue;
    }
    SentenceTrace trace;
    trace.original_index = static_cast<Index>(si);
    trace.tokens = sent;
    std::vector<Vector> inputs;
    inputs.reserve(sent.size());
    for (int idx : sent) {
      require(idx >= 1 && idx <= static_cast<int>(model.vocab),
              "classifier: word index " + std::to_string(idx) +
                  " outside [1, " + std::to_string(model.vocab) + "]");
      inputs.push_back(emb.value.row(idx).transpose());
    }
    trace.words = bi_run(model.word_f, model.word_b, inputs);
    trace.pooled = self_attend(model.word_attn, trace.words.ann);
    fwd.sentences.push_back(std::move(trace));
  }
  require(!fwd.sentences.empty(),
          "classifier: every sentence of the document is empty");

  std::vector<Vector> sent_vecs;
  sent_vecs.reserve(fwd.sentences.size());
  for (const SentenceTrace& t : fwd.sentences) sent_vecs.push_back(t.pooled.s);
  fwd.sent_level = bi_run(model.sent_f, model.sent_b, sent_vecs);
  fwd.doc = self_attend(model.sent_attn, fwd.sent_level.ann);

  const Vector logits = model.store.at("head_W").value * fwd.doc.s +
                        model.store.at("head_b").value.row(0).transpose();
  fwd.probs = softmax(logits);
  if (label >= 0) {
    require(label < static_cast<int>(model.cfg.classes),
            "classifier: label outside the class range");
    fwd.loss = -log_softmax(logits)[label];
  }
  return fwd;
}

void han_backward(HanModel& model, const HanForward& fwd, int label) {
  require(label >= 0 && label < static_cast<int>(model.cfg.classes),
          "classifier backward: label outside the class range");
  Vector dlogits = fwd.probs;
  dlogits[label] -= 1.0;
  Param& head_W = model.store.at("head_W");
  Param& head_b = model.store.at("head_b");
  head_W.grad += dlogits * fwd.doc.s.transpose();
  head_b.grad.row(0) += dlogits.transpose();
  const Vector dv = head_W.value.transpose() * dlogits;

  const Matrix dsent_ann =
      self_attend_backward(model.sent_attn, fwd.sent_level.ann, fwd.doc, dv);
  const std::vector<Vector> dsent_vecs =
      bi_backward(model.sent_f, model.sent_b, fwd.sent_level, dsent_ann);

  Param& emb = model.store.at("embedding");
  for (std::size_t i = 0; i < fwd.sentences.size(); ++i) {
    const SentenceTrace& trace = fwd.sentences[i];
    const Matrix dann = self_attend_backward(
        model.word_attn, trace.words.ann, trace.pooled, dsent_vecs[i]);
    const std::vector<Vector> din =
        bi_backward(model.word_f, model.word_b, trace.words, dann);
    for (std::size_t t = 0; t < trace.tokens.size(); ++t)
      emb.grad.row(trace.tokens[t]) += din[t].transpose();
  }
}

double han_loss(const HanModel& model,
                const std::vector<std::vector<int>>& sentences, int label) {
  require(label >= 0, "classifier: loss needs a label");
  return han_forward(model, sentences, label).loss;
}

std::vector<WordImportance> reweighed_word_importance(const HanForward& fwd) {
  std::vector<WordImportance> out;
  for (std::size_t i = 0; i < fwd.sentences.size(); ++i) {
    const SentenceTrace& trace = fwd.sentences[i];
    const double sent_alpha = fwd.doc.alpha[static_cast<Index>(i)];
    for (Index t = 0; t < trace.pooled.alpha.size(); ++t)
      out.push_back({trace.original_index, t,
                     trace.pooled.alpha[t] * sent_alpha});
  }
  return out;
}

void write_han_attention_csv(
    const std::string& path, const HanForward& fwd,
    const std::vector<std::vector<std::string>>* tokens) {
  std::ofstream out(path);
  require(out.good(), "cannot write attention table to '" + path + "'");
  out << "sentence_idx,word_idx,token,word_alpha,sentence_alpha,product\n";
  char wa[64], sa[64], pr[64];
  for (std::size_t i = 0; i < fwd.sentences.size(); ++i) {
    const SentenceTrace& trace = fwd.sentences[i];
    const double sent_alpha = fwd.doc.alpha[static_cast<Index>(i)];
    for (Index t = 0; t < trace.pooled.alpha.size(); ++t) {
      std::string token = std::to_string(trace.tokens[t]);
      const std::size_t oi = static_cast<std::size_t>(trace.original_index);
      if (tokens && oi < tokens->size() &&
          static_cast<std::size_t>(t) < (*tokens)[oi].size())
        token = (*tokens)[oi][t];
      if (token.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char ch : token) {
          if (ch == '"') quoted += '"';
          quoted += ch;
        }
        quoted += '"';
        token = quoted;
      }
      std::snprintf(wa, sizeof(wa), "%.17g", trace.pooled.alpha[t]);
      std::snprintf(sa, sizeof(sa), "%.17g", sent_alpha);
      std::snprintf(pr, sizeof(pr), "%.17g",
                    trace.pooled.alpha[t] * sent_alpha);
      out << trace.original_index << ',' << t << ',' << token << ',' << wa
          << ',' << sa << ',' << pr << '\n';
    }
  }
  require(out.good(), "failed while writing '" + path + "'");
}

}  // namespace ntx
