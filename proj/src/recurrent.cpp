#include <ntx/recurrent.hpp>

#include <algorithm>
#include <cmath>

namespace ntx {
namespace {

GateParams add_gate(ParamStore& store, const std::string& prefix,
                    const std::string& gate, Index H, Index d_in,
                    InitKind bias_init = InitKind::zero) {
  const std::string suffix = gate.empty() ? "" : "_" + gate;
  GateParams g;
  g.U = &store.add(prefix + "_U" + suffix, H, d_in, InitKind::glorot);
  g.W = &store.add(prefix + "_W" + suffix, H, H, InitKind::glorot);
  g.b = &store.add(prefix + "_b" + suffix, 1, H, bias_init);
  return g;
}

Vector affine(const GateParams& g, const Vector& x, const Vector& hin) {
  return g.U->value * x + g.W->value * hin + g.b->value.row(0).transpose();
}

// Accumulates parameter gradients for one affine block and returns the
// input-side gradients via dx/dhin.
void affine_backward(const GateParams& g, const Vector& da, const Vector& x,
                     const Vector& hin, Vector& dx, Vector& dhin) {
  g.U->grad += da * x.transpose();
  g.W->grad += da * hin.transpose();
  g.b->grad.row(0) += da.transpose();
  dx += g.U->value.transpose() * da;
  dhin += g.W->value.transpose() * da;
}

void check_step_inputs(const Cell& cell, const Vector& x,
                       const Vector& h_prev) {
  require(x.size() == cell.d_in, "cell step: input size " +
                                     std::to_string(x.size()) +
                                     " != " + std::to_string(cell.d_in));
  require(h_prev.size() == cell.H, "cell step: state size " +
                                       std::to_string(h_prev.size()) +
                                       " != " + std::to_string(cell.H));
}

Vector sigmoid_vec(const Vector& v) {
  return v.unaryExpr([](double z) { return sigmoid(z); });
}

}  // namespace

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "rnn") return CellKind::rnn;
  if (s == "lstm") return CellKind::lstm;
  if (s == "gru") return CellKind::gru;
  throw ConfigError("unknown cell kind '" + s + "' (want rnn|lstm|gru)");
}

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::rnn: return "rnn";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
  }
  return "?";
}

Cell make_cell(ParamStore& store, CellKind kind, const std::string& prefix,
               Index d_in, Index H) {
  require(d_in >= 1, "cell: input size must be positive");
  require(H >= 1, "cell: state size must be positive");
  Cell cell;
  cell.kind = kind;
  cell.d_in = d_in;
  cell.H = H;
  switch (kind) {
    case CellKind::rnn:
      cell.rnn.cand = add_gate(store, prefix, "", H, d_in);
      break;
    case CellKind::lstm:
      cell.lstm.f = add_gate(store, prefix, "f", H, d_in, InitKind::ones);
      cell.lstm.i = add_gate(store, prefix, "i", H, d_in);
      cell.lstm.c = add_gate(store, prefix, "c", H, d_in);
      cell.lstm.o = add_gate(store, prefix, "o", H, d_in);
      break;
    case CellKind::gru:
      cell.gru.r = add_gate(store, prefix, "r", H, d_in);
      cell.gru.z = add_gate(store, prefix, "z", H, d_in);
      cell.gru.h = add_gate(store, prefix, "h", H, d_in);
      break;
  }
  return cell;
}

Vector rnn_step(const Cell& cell, const Vector& x, const Vector& h_prev,
                StepCache* cache) {
  require(cell.kind == CellKind::rnn, "rnn_step on non-rnn cell");
  check_step_inputs(cell, x, h_prev);
  Vector h = affine(cell.rnn.cand, x, h_prev).array().tanh();
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->h = h;
  }
  return h;
}

std::pair<Vector, Vector> lstm_step(const Cell& cell, const Vector& x,
                                    const Vector& h_prev,
                                    const Vector& c_prev, StepCache* cache) {
  require(cell.kind == CellKind::lstm, "lstm_step on non-lstm cell");
  check_step_inputs(cell, x, h_prev);
  require(c_prev.size() == cell.H, "lstm_step: cell state size mismatch");
  const Vector f = sigmoid_vec(affine(cell.lstm.f, x, h_prev));
  const Vector i = sigmoid_vec(affine(cell.lstm.i, x, h_prev));
  const Vector cand = affine(cell.lstm.c, x, h_prev).array().tanh();
  const Vector o = sigmoid_vec(affine(cell.lstm.o, x, h_prev));
  const Vector c = f.cwiseProduct(c_prev) + i.cwiseProduct(cand);
  const Vector tc = c.array().tanh();
  const Vector h = tc.cwiseProduct(o);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->f = f;
    cache->i = i;
    cache->cand = cand;
    cache->o = o;
    cache->tanh_c = tc;
    cache->c = c;
    cache->h = h;
  }
  return {h, c};
}

Vector gru_step(const Cell& cell, const Vector& x, const Vector& h_prev,
                StepCache* cache) {
  require(cell.kind == CellKind::gru, "gru_step on non-gru cell");
  check_step_inputs(cell, x, h_prev);
  const Vector r = sigmoid_vec(affine(cell.gru.r, x, h_prev));
  const Vector z = sigmoid_vec(affine(cell.gru.z, x, h_prev));
  const Vector rh = r.cwiseProduct(h_prev);
  const Vector cand = affine(cell.gru.h, x, rh).array().tanh();
  // z gates the previous state; 1-z admits the candidate.
  const Vector h =
      z.cwiseProduct(h_prev) + (Vector::Ones(cell.H) - z).cwiseProduct(cand);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = r;
    cache->z = z;
    cache->rh = rh;
    cache->cand = cand;
    cache->h = h;
  }
  return h;
}

void cell_step(const Cell& cell, const Vector& x, Vector& h, Vector& c,
               StepCache* cache) {
  switch (cell.kind) {
    case CellKind::rnn:
      h = rnn_step(cell, x, h, cache);
      break;
    case CellKind::lstm: {
      auto [hn, cn] = lstm_step(cell, x, h, c, cache);
      h = hn;
      c = cn;
      break;
    }
    case CellKind::gru:
      h = gru_step(cell, x, h, cache);
      break;
  }
}

void cell_backward(const Cell& cell, const StepCache& cache, const Vector& dh,
                   const Vector& dc, Vector& dx, Vector& dh_prev,
                   Vector& dc_prev) {
  require(dh.size() == cell.H, "cell_backward: dh size mismatch");
  if (dx.size() == 0) dx = Vector::Zero(cell.d_in);
  if (dh_prev.size() == 0) dh_prev = Vector::Zero(cell.H);
  switch (cell.kind) {
    case CellKind::rnn: {
      const Vector da =
          dh.cwiseProduct(Vector::Ones(cell.H) - cache.h.cwiseProduct(cache.h));
      affine_backward(cell.rnn.cand, da, cache.x, cache.h_prev, dx, dh_prev);
      break;
    }
    case CellKind::lstm: {
      if (dc_prev.size() == 0) dc_prev = Vector::Zero(cell.H);
      const Vector ones = Vector::Ones(cell.H);
      Vector dc_total = dc.size() ? dc : Vector::Zero(cell.H);
      const Vector do_ = dh.cwiseProduct(cache.tanh_c);
      dc_total += dh.cwiseProduct(cache.o).cwiseProduct(
          ones - cache.tanh_c.cwiseProduct(cache.tanh_c));
      const Vector da_o =
          do_.cwiseProduct(cache.o).cwiseProduct(ones - cache.o);
      const Vector da_f = dc_total.cwiseProduct(cache.c_prev)
                              .cwiseProduct(cache.f)
                              .cwiseProduct(ones - cache.f);
      const Vector da_i = dc_total.cwiseProduct(cache.cand)
                              .cwiseProduct(cache.i)
                              .cwiseProduct(ones - cache.i);
      const Vector da_c = dc_total.cwiseProduct(cache.i).cwiseProduct(
          ones - cache.cand.cwiseProduct(cache.cand));
      dc_prev += dc_total.cwiseProduct(cache.f);
      affine_backward(cell.lstm.f, da_f, cache.x, cache.h_prev, dx, dh_prev);
      affine_backward(cell.lstm.i, da_i, cache.x, cache.h_prev, dx, dh_prev);
      affine_backward(cell.lstm.c, da_c, cache.x, cache.h_prev, dx, dh_prev);
      affine_backward(cell.lstm.o, da_o, cache.x, cache.h_prev, dx, dh_prev);
      break;
    }
    case CellKind::gru: {
      const Vector ones = Vector::Ones(cell.H);
      const Vector dz = dh.cwiseProduct(cache.h_prev - cache.cand);
      const Vector dcand = dh.cwiseProduct(ones - cache.z);
      const Vector da_h =
          dcand.cwiseProduct(ones - cache.cand.cwiseProduct(cache.cand));
      Vector drh = Vector::Zero(cell.H);
      affine_backward(cell.gru.h, da_h, cache.x, cache.rh, dx, drh);
      const Vector dr = drh.cwiseProduct(cache.h_prev);
      const Vector da_r =
          dr.cwiseProduct(cache.r).cwiseProduct(ones - cache.r);
      const Vector da_z =
          dz.cwiseProduct(cache.z).cwiseProduct(ones - cache.z);
      dh_prev += dh.cwiseProduct(cache.z) + drh.cwiseProduct(cache.r);
      affine_backward(cell.gru.r, da_r, cache.x, cache.h_prev, dx, dh_prev);
      affine_backward(cell.gru.z, da_z, cache.x, cache.h_prev, dx, dh_prev);
      break;
    }
  }
}

Stack make_stack(ParamStore& store, CellKind kind, const std::string& prefix,
                 Index d_in, Index H, Index depth) {
  require(depth >= 1, "stack depth must be positive");
  Stack stack;
  for (Index l = 0; l < depth; ++l) {
    const Index in = (l == 0) ? d_in : H;
    stack.cells.push_back(
        make_cell(store, kind, prefix + "l" + std::to_string(l), in, H));
  }
  return stack;
}

SequenceCache run_sequence(const Stack& stack,
                           const std::vector<Vector>& inputs,
                           const std::vector<Vector>* h0,
                           const std::vector<Vector>* c0) {
  require(!inputs.empty(), "run_sequence: empty input sequence");
  const Index depth = stack.depth();
  const Index H = stack.H();
  std::vector<Vector> h(depth, Vector::Zero(H));
  std::vector<Vector> c(depth, Vector::Zero(H));
  if (h0) {
    require(static_cast<Index>(h0->size()) == depth,
            "run_sequence: h0 layer count mismatch");
    h = *h0;
  }
  if (c0) {
    require(static_cast<Index>(c0->size()) == depth,
            "run_sequence: c0 layer count mismatch");
    c = *c0;
  }
  SequenceCache cache;
  const Index T = static_cast<Index>(inputs.size());
  cache.steps.resize(T, std::vector<StepCache>(depth));
  cache.top_h.resize(T, H);
  for (Index t = 0; t < T; ++t) {
    Vector x = inputs[t];
    for (Index l = 0; l < depth; ++l) {
      cell_step(stack.cells[l], x, h[l], c[l], &cache.steps[t][l]);
      x = h[l];
    }
    cache.top_h.row(t) = h[depth - 1].transpose();
  }
  cache.final_h = h;
  cache.final_c = c;
  return cache;
}

std::vector<Vector> sequence_backward(const Stack& stack,
                                      const SequenceCache& cache,
                                      const std::vector<Vector>& dtop,
                                      const std::vector<Vector>* dfinal_h,
                                      const std::vector<Vector>* dfinal_c,
                                      std::vector<Vector>* dh0,
                                      std::vector<Vector>* dc0) {
  const Index depth = stack.depth();
  const Index H = stack.H();
  const Index T = cache.T();
  require(dtop.empty() || static_cast<Index>(dtop.size()) == T,
          "sequence_backward: dtop must be empty or one entry per step");
  std::vector<Vector> carry_h(depth, Vector::Zero(H));
  std::vector<Vector> carry_c(depth, Vector::Zero(H));
  if (dfinal_h) {
    require(static_cast<Index>(dfinal_h->size()) == depth,
            "sequence_backward: dfinal_h layer count mismatch");
    for (Index l = 0; l < depth; ++l)
      if ((*dfinal_h)[l].size()) carry_h[l] += (*dfinal_h)[l];
  }
  if (dfinal_c) {
    require(static_cast<Index>(dfinal_c->size()) == depth,
            "sequence_backward: dfinal_c layer count mismatch");
    for (Index l = 0; l < depth; ++l)
      if ((*dfinal_c)[l].size()) carry_c[l] += (*dfinal_c)[l];
  }
  std::vector<Vector> dinputs(T);
  for (Index t = T - 1; t >= 0; --t) {
    Vector from_above;
    for (Index l = depth - 1; l >= 0; --l) {
      Vector dh_total = carry_h[l];
      if (l == depth - 1 && !dtop.empty() && dtop[t].size())
        dh_total += dtop[t];
      if (l < depth - 1) dh_total += from_above;
      Vector dx = Vector::Zero(stack.cells[l].d_in);
      Vector dhp = Vector::Zero(H);
      Vector dcp = Vector::Zero(H);
      cell_backward(stack.cells[l], cache.steps[t][l], dh_total, carry_c[l],
                    dx, dhp, dcp);
      carry_h[l] = dhp;
      carry_c[l] = dcp;
      from_above = dx;
    }
    dinputs[t] = from_above;
  }
  if (dh0) *dh0 = carry_h;
  if (dc0) *dc0 = carry_c;
  return dinputs;
}

// --- language model ----------------------------------------------------

namespace {

Vector lm_input_vector(const LanguageModel& lm, int index) {
  require(index >= 1 && index <= static_cast<int>(lm.vocab),
          "language model: token index " + std::to_string(index) +
              " outside [1, " + std::to_string(lm.vocab) + "]");
  if (lm.cfg.one_hot) {
    Vector v = Vector::Zero(lm.vocab);
    v[index - 1] = 1.0;
    return v;
  }
  return lm.store.at("embedding").value.row(index).transpose();
}

Vector lm_logits(const LanguageModel& lm, const Vector& h_top) {
  Vector logits = lm.store.at("head_V").value * h_top;
  if (lm.cfg.head_bias)
    logits += lm.store.at("head_b").value.row(0).transpose();
  return logits;
}

}  // namespace

LanguageModel make_lm(const LmConfig& cfg, Index vocab_size, int bos_index,
                      std::uint64_t seed) {
  require(vocab_size >= 1, "language model: vocabulary must be non-empty");
  require(bos_index >= 1 && bos_index <= static_cast<int>(vocab_size),
          "language model: <bos> index outside the vocabulary");
  require(cfg.H >= 1 && cfg.depth >= 1, "language model: bad dimensions");
  LanguageModel lm;
  lm.cfg = cfg;
  lm.vocab = vocab_size;
  lm.bos = bos_index;
  Index d_in = cfg.one_hot ? vocab_size : cfg.d;
  if (!cfg.one_hot) {
    require(cfg.d >= 1, "language model: embedding width must be positive");
    Param& emb =
        lm.store.add("embedding", vocab_size + 1, cfg.d, InitKind::glorot);
    emb.mask_row0 = true;
  }
  lm.stack = make_stack(lm.store, cfg.kind, "", d_in, cfg.H, cfg.depth);
  lm.store.add("head_V", vocab_size, cfg.H, InitKind::glorot);
  if (cfg.head_bias) lm.store.add("head_b", 1, vocab_size, InitKind::zero);
  init(lm.store, seed);
  return lm;
}

LmForward lm_forward(const LanguageModel& lm, const std::vector<int>& targets) {
  require(!targets.empty(), "language model: empty target sequence");
  const Index T = static_cast<Index>(targets.size());
  LmForward fwd;
  fwd.fed.reserve(targets.size());
  fwd.fed.push_back(lm.bos);
  for (Index t = 0; t + 1 < T; ++t) fwd.fed.push_back(targets[t]);
  fwd.inputs.reserve(fwd.fed.size());
  for (int idx : fwd.fed) fwd.inputs.push_back(lm_input_vector(lm, idx));
  // targets themselves are validated through lm_input_vector's range check
  // for all but the last one; check that one explicitly.
  require(targets.back() >= 1 && targets.back() <= static_cast<int>(lm.vocab),
          "language model: target index outside the vocabulary");
  fwd.seq = run_sequence(lm.stack, fwd.inputs);
  fwd.probs.resize(T, lm.vocab);
  double nll = 0.0;
  for (Index t = 0; t < T; ++t) {
    const Vector logits = lm_logits(lm, fwd.seq.top_h.row(t).transpose());
    fwd.probs.row(t) = softmax(logits).transpose();
    nll -= log_softmax(logits)[targets[t] - 1];
  }
  fwd.loss = nll / static_cast<double>(T);
  return fwd;
}

void lm_backward(LanguageModel& lm, const LmForward& fwd,
                 const std::vector<int>& targets) {
  const Index T = static_cast<Index>(targets.size());
  require(fwd.probs.rows() == T, "lm_backward: forward/target length mismatch");
  Param& head = lm.store.at("head_V");
  std::vector<Vector> dtop(T);
  const double scale = 1.0 / static_cast<double>(T);
  for (Index t = 0; t < T; ++t) {
    Vector dlogits = fwd.probs.row(t).transpose() * scale;
    dlogits[targets[t] - 1] -= scale;
    head.grad += dlogits * fwd.seq.top_h.row(t);
    if (lm.cfg.head_bias)
      lm.store.at("head_b").grad.row(0) += dlogits.transpose();
    dtop[t] = head.value.transpose() * dlogits;
  }
  std::vector<Vector> dinputs = sequence_backward(lm.stack, fwd.seq, dtop);
  if (!lm.cfg.one_hot) {
    Param& emb = lm.store.at("embedding");
    for (std::size_t t = 0; t < fwd.fed.size(); ++t)
      emb.grad.row(fwd.fed[t]) += dinputs[t].transpose();
  }
}

double sequence_logprob(const LanguageModel& lm,
                        const std::vector<int>& indices) {
  LmForward fwd = lm_forward(lm, indices);
  return -fwd.loss * static_cast<double>(indices.size());
}

std::vector<int> sample(const LanguageModel& lm, std::size_t max_steps,
                        double temperature, Rng& rng, int eos_index) {
  require(temperature >= 0.0, "sample: temperature must be non-negative");
  const Index depth = lm.stack.depth();
  const Index H = lm.stack.H();
  std::vector<Vector> h(depth, Vector::Zero(H));
  std::vector<Vector> c(depth, Vector::Zero(H));
  std::vector<int> out;
  int prev = lm.bos;
  for (std::size_t step = 0; step < max_steps; ++step) {
    Vector x = lm_input_vector(lm, prev);
    for (Index l = 0; l < depth; ++l) {
      cell_step(lm.stack.cells[l], x, h[l], c[l]);
      x = h[l];
    }
    Vector logits = lm_logits(lm, h[depth - 1]);
    int cls = 0;
    if (temperature < 1e-6) {
      logits.maxCoeff(&cls);
    } else {
      const ProbVector p = softmax(Vector(logits / temperature));
      const double u = rng.uniform();
      double cum = 0.0;
      cls = static_cast<int>(lm.vocab) - 1;
      for (Index j = 0; j < p.size(); ++j) {
        cum += p[j];
        if (u < cum) {
          cls = static_cast<int>(j);
          break;
        }
      }
    }
    const int token = cls + 1;
    out.push_back(token);
    if (eos_index > 0 && token == eos_index) break;
    prev = token;
  }
  return out;
}

}  // namespace ntx
