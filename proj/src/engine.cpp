#include <ntx/engine.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

namespace ntx {

namespace {

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
}

// Generic epoch loop; train_one runs forward+backward and returns the
// example's loss, loss_one is forward-only.
template <typename Example, typename TrainOne, typename LossOne>
FitResult fit_impl(ParamStore& store, const std::vector<Example>& train,
                   const std::vector<Example>* val, const TrainConfig& cfg,
                   TrainLog* log, std::ostream* progress,
                   std::size_t patience, const TrainOne& train_one,
                   const LossOne& loss_one) {
  require(!train.empty(), "fit: training set is empty");
  require(cfg.epochs > 0, "fit: need at least one epoch");

  Trainer trainer(store, cfg);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const bool has_val = val != nullptr && !val->empty();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0, global_step = 0;
  FitResult result;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * epoch));
    shuffle_indices(order, rng);

    double loss_sum = 0.0;
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t at = 0; at < order.size(); at += batch) {
      const std::size_t end = std::min(order.size(), at + batch);
      for (std::size_t i = at; i < end; ++i)
        loss_sum += train_one(train[order[i]]);
      scale_gradients(store, 1.0 / static_cast<double>(end - at));
      trainer.step();
      ++global_step;
    }

    result.train_loss = loss_sum / static_cast<double>(train.size());
    result.val_loss = 0.0;
    if (has_val) {
      for (const Example& ex : *val) result.val_loss += loss_one(ex);
      result.val_loss /= static_cast<double>(val->size());
    }
    result.epochs_run = epoch;

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (log != nullptr)
      log->record(epoch, global_step, result.train_loss, result.val_loss,
                  seconds);
    if (progress != nullptr) {
      (*progress) << "epoch " << epoch << "/" << cfg.epochs << "  train "
                  << result.train_loss;
      if (has_val) (*progress) << "  val " << result.val_loss;
      (*progress) << "  (" << seconds << "s)\n";
    }

    if (has_val && patience > 0) {
      if (result.val_loss < best_val) {
        best_val = result.val_loss;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= patience) {
        break;
      }
    }
  }
  return result;
}

// Runs fn(i) for every i in [0, n); worker threads own fixed contiguous
// shards so results written per index are deterministic.
template <typename Fn>
void parallel_for(std::size_t n, int workers, const Fn& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + w - 1) / w;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t * chunk < n; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t end = std::min(n, (t + 1) * chunk);
      for (std::size_t i = t * chunk; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void scale_gradients(ParamStore& store, double factor) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store.param(i);
    if (p.trainable) p.grad *= factor;
  }
}

FitResult fit_cnn(CnnModel& model, const std::vector<EncodedDoc>& train,
                  const std::vector<EncodedDoc>* val, const TrainConfig& cfg,
                  TrainLog* log, std::ostream* progress,
                  std::size_t patience) {
  return fit_impl(
      model.store, train, val, cfg, log, progress, patience,
      [&](const EncodedDoc& doc) {
        auto [probs, cache] = cnn_forward(model, doc);
        cnn_backward(model, cache, classification_grad(model, probs, doc.label));
        return classification_loss(probs, doc.label);
      },
      [&](const EncodedDoc& doc) {
        return classification_loss(cnn_forward(model, doc).first, doc.label);
      });
}

FitResult fit_lm(LanguageModel& model, const std::vector<IndexSeq>& train,
                 const std::vector<IndexSeq>* val, const TrainConfig& cfg,
                 TrainLog* log, std::ostream* progress,
                 std::size_t patience) {
  return fit_impl(
      model.store, train, val, cfg, log, progress, patience,
      [&](const IndexSeq& seq) {
        const LmForward fwd = lm_forward(model, seq);
        lm_backward(model, fwd, seq);
        return fwd.loss;
      },
      [&](const IndexSeq& seq) { return lm_forward(model, seq).loss; });
}

FitResult fit_seq2seq(Seq2Seq& model, const std::vector<IndexPair>& train,
                      const std::vector<IndexPair>* val,
                      const TrainConfig& cfg, TrainLog* log,
                      std::ostream* progress, std::size_t patience) {
  return fit_impl(
      model.store, train, val, cfg, log, progress, patience,
      [&](const IndexPair& pair) {
        const Seq2SeqForward fwd =
            seq2seq_forward(model, pair.first, pair.second);
        seq2seq_backward(model, fwd, pair.second);
        return fwd.loss;
      },
      [&](const IndexPair& pair) {
        return seq2seq_loss(model, pair.first, pair.second);
      });
}

FitResult fit_han(HanModel& model, const std::vector<SentenceDoc>& train,
                  const std::vector<SentenceDoc>* val, const TrainConfig& cfg,
                  TrainLog* log, std::ostream* progress,
                  std::size_t patience) {
  return fit_impl(
      model.store, train, val, cfg, log, progress, patience,
      [&](const SentenceDoc& doc) {
        const HanForward fwd = han_forward(model, doc.sentences, doc.label);
        han_backward(model, fwd, doc.label);
        return fwd.loss;
      },
      [&](const SentenceDoc& doc) {
        return han_loss(model, doc.sentences, doc.label);
      });
}

EvalMetrics eval_cnn(const CnnModel& model,
                     const std::vector<EncodedDoc>& docs, int workers) {
  require(!docs.empty(), "eval: empty corpus");
  std::vector<double> loss(docs.size());
  std::vector<char> correct(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    const ProbVector probs = cnn_forward(model, docs[i]).first;
    loss[i] = classification_loss(probs, docs[i].label);
    correct[i] = predicted_class(probs) == docs[i].label ? 1 : 0;
  });
  EvalMetrics m;
  m.examples = docs.size();
  m.loss = std::accumulate(loss.begin(), loss.end(), 0.0) /
           static_cast<double>(docs.size());
  m.accuracy = std::accumulate(correct.begin(), correct.end(), 0.0) /
               static_cast<double>(docs.size());
  return m;
}

EvalMetrics eval_lm(const LanguageModel& model,
                    const std::vector<IndexSeq>& seqs, int workers) {
  require(!seqs.empty(), "eval: empty corpus");
  std::vector<double> nll(seqs.size());
  std::vector<std::size_t> hits(seqs.size());
  parallel_for(seqs.size(), workers, [&](std::size_t i) {
    const LmForward fwd = lm_forward(model, seqs[i]);
    nll[i] = fwd.loss * static_cast<double>(seqs[i].size());
    std::size_t h = 0;
    for (Index t = 0; t < fwd.probs.rows(); ++t) {
      Index cls = 0;
      fwd.probs.row(t).maxCoeff(&cls);
      if (static_cast<int>(cls) + 1 == seqs[i][static_cast<std::size_t>(t)])
        ++h;
    }
    hits[i] = h;
  });
  EvalMetrics m;
  m.examples = seqs.size();
  for (const IndexSeq& s : seqs) m.tokens += s.size();
  require(m.tokens > 0, "eval: no tokens to score");
  m.loss = std::accumulate(nll.begin(), nll.end(), 0.0) /
           static_cast<double>(m.tokens);
  m.accuracy =
      static_cast<double>(std::accumulate(hits.begin(), hits.end(),
                                          std::size_t{0})) /
      static_cast<double>(m.tokens);
  m.perplexity = std::exp(m.loss);
  return m;
}

EvalMetrics eval_seq2seq(const Seq2Seq& model,
                         const std::vector<IndexPair>& pairs, int workers) {
  require(!pairs.empty(), "eval: empty corpus");
  std::vector<double> nll(pairs.size());
  std::vector<std::size_t> hits(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const Seq2SeqForward fwd =
        seq2seq_forward(model, pairs[i].first, pairs[i].second);
    nll[i] = fwd.loss * static_cast<double>(pairs[i].second.size());
    std::size_t h = 0;
    for (Index t = 0; t < fwd.probs.rows(); ++t) {
      Index cls = 0;
      fwd.probs.row(t).maxCoeff(&cls);
      if (static_cast<int>(cls) + 1 ==
          pairs[i].second[static_cast<std::size_t>(t)])
        ++h;
    }
    hits[i] = h;
  });
  EvalMetrics m;
  m.examples = pairs.size();
  for (const IndexPair& p : pairs) m.tokens += p.second.size();
  require(m.tokens > 0, "eval: no target tokens to score");
  m.loss = std::accumulate(nll.begin(), nll.end(), 0.0) /
           static_cast<double>(m.tokens);
  m.accuracy =
      static_cast<double>(std::accumulate(hits.begin(), hits.end(),
                                          std::size_t{0})) /
      static_cast<double>(m.tokens);
  m.perplexity = std::exp(m.loss);
  return m;
}

EvalMetrics eval_han(const HanModel& model,
                     const std::vector<SentenceDoc>& docs, int workers) {
  require(!docs.empty(), "eval: empty corpus");
  std::vector<double> loss(docs.size());
  std::vector<char> correct(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    const HanForward fwd = han_forward(model, docs[i].sentences, docs[i].label);
    loss[i] = fwd.loss;
    Index cls = 0;
    fwd.probs.maxCoeff(&cls);
    correct[i] = static_cast<int>(cls) == docs[i].label ? 1 : 0;
  });
  EvalMetrics m;
  m.examples = docs.size();
  m.loss = std::accumulate(loss.begin(), loss.end(), 0.0) /
           static_cast<double>(docs.size());
  m.accuracy = std::accumulate(correct.begin(), correct.end(), 0.0) /
               static_cast<double>(docs.size());
  return m;
}

}  // namespace ntx
