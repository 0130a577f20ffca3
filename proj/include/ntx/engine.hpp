#pragma once

#include <ntx/cnn.hpp>
#include <ntx/han.hpp>
#include <ntx/recurrent.hpp>
#include <ntx/seq2seq.hpp>
#include <ntx/train.hpp>

#include <iosfwd>
#include <utility>
#include <vector>

namespace ntx {

// Corpus-level training and evaluation loops. One example at a time:
// gradients accumulate over each batch and are scaled to the batch mean
// before the optimizer step, which is mathematically identical to a padded
// batch whose loss ignores padding. Everything here is a pure function of
// (model, data, config) — shuffling draws from a generator seeded by
// (config.seed, epoch), so reruns are bit-identical.

// Multiplies every trainable gradient in the store by `factor`.
void scale_gradients(ParamStore& store, double factor);

struct SentenceDoc {
  std::vector<std::vector<int>> sentences;  // word indices per sentence
  int label = 0;
};

using IndexSeq = std::vector<int>;
using IndexPair = std::pair<IndexSeq, IndexSeq>;  // (source, target)

struct FitResult {
  double train_loss = 0.0;      // mean per-example loss of the last epoch
  double val_loss = 0.0;        // mean validation loss (0 without a val set)
  std::size_t epochs_run = 0;   // < config.epochs when patience triggered
};

// `patience` > 0 stops after that many epochs without a validation
// improvement (needs a validation set). `log` and `progress` may be null.
FitResult fit_cnn(CnnModel& model, const std::vector<EncodedDoc>& train,
                  const std::vector<EncodedDoc>* val, const TrainConfig& cfg,
                  TrainLog* log = nullptr, std::ostream* progress = nullptr,
                  std::size_t patience = 0);

FitResult fit_lm(LanguageModel& model, const std::vector<IndexSeq>& train,
                 const std::vector<IndexSeq>* val, const TrainConfig& cfg,
                 TrainLog* log = nullptr, std::ostream* progress = nullptr,
                 std::size_t patience = 0);

FitResult fit_seq2seq(Seq2Seq& model, const std::vector<IndexPair>& train,
                      const std::vector<IndexPair>* val,
                      const TrainConfig& cfg, TrainLog* log = nullptr,
                      std::ostream* progress = nullptr,
                      std::size_t patience = 0);

FitResult fit_han(HanModel& model, const std::vector<SentenceDoc>& train,
                  const std::vector<SentenceDoc>* val, const TrainConfig& cfg,
                  TrainLog* log = nullptr, std::ostream* progress = nullptr,
                  std::size_t patience = 0);

struct EvalMetrics {
  double loss = 0.0;        // mean loss: per document (classifiers) or
                            // per token (sequence models)
  double accuracy = 0.0;    // label accuracy / teacher-forced token accuracy
  double perplexity = 0.0;  // exp(loss) for sequence models, 0 otherwise
  std::size_t examples = 0;
  std::size_t tokens = 0;   // scored tokens (sequence models)
};

// Forward passes only; `workers` > 1 shards the corpus across threads
// (reads share the model, partial sums reduce in a fixed order).
EvalMetrics eval_cnn(const CnnModel& model,
                     const std::vector<EncodedDoc>& docs, int workers = 1);
EvalMetrics eval_lm(const LanguageModel& model,
                    const std::vector<IndexSeq>& seqs, int workers = 1);
EvalMetrics eval_seq2seq(const Seq2Seq& model,
                         const std::vector<IndexPair>& pairs,
                         int workers = 1);
EvalMetrics eval_han(const HanModel& model,
                     const std::vector<SentenceDoc>& docs, int workers = 1);

}  // namespace ntx
