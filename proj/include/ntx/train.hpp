#pragma once

#include <ntx/core.hpp>
#include <ntx/types.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ntx {

// Per-parameter initialization rule applied by init().
enum class InitKind { glorot, zero, ones };

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;            // same shape as value, accumulated by backward()
  bool trainable = true;  // false = frozen (e.g. static embeddings)
  bool mask_row0 = false; // row 0 pinned to zero (embedding padding row)
  InitKind init = InitKind::glorot;
};

// Named parameter registry with deterministic (insertion) iteration order.
// One Param per logical parameter gives the "shared across time steps"
// semantics for free: every step reads the same storage and accumulates
// into the same gradient.
class ParamStore {
 public:
  Param& add(const std::string& name, Index rows, Index cols,
             InitKind init = InitKind::glorot, bool trainable = true,
             bool mask_row0 = false);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  Param& param(std::size_t i) { return *params_[i]; }
  const Param& param(std::size_t i) const { return *params_[i]; }

  void zero_grads();
  std::size_t scalar_count() const;     // every registered scalar
  std::size_t trainable_count() const;  // scalars in trainable tensors

 private:
  std::vector<std::unique_ptr<Param>> params_;  // stable addresses
  std::unordered_map<std::string, std::size_t> index_;
};

// Glorot-uniform matrices, zero biases (InitKind::zero), ones for
// LSTM forget-gate biases (InitKind::ones); deterministic given seed.
// Masked rows are zeroed afterwards.
void init(ParamStore& store, std::uint64_t seed);

enum class Optimizer { sgd, adam };
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
};

// Owns optimizer state (Adam moments). step() clips the global gradient
// norm, applies one update to every trainable parameter, re-pins masked
// rows, zeroes all gradients, and returns the number of scalars the update
// rule was applied to. Non-finite gradients abort with the parameter name.
class Trainer {
 public:
  Trainer(ParamStore& store, TrainConfig config);
  std::size_t step();
  const TrainConfig& config() const { return config_; }

 private:
  ParamStore* store_;
  TrainConfig config_;
  std::vector<Matrix> m_, v_;  // Adam first/second moments, per parameter
  long t_ = 0;                 // Adam timestep
};

// Central-difference verification of hand-derived gradients. loss_fn(true)
// must compute the loss AND accumulate gradients into the store (which
// grad_check zeroes first); loss_fn(false) must compute the loss alone.
// Relative error per coordinate: |a - n| / max(|a|, |n|, 1e-8).
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  Index worst_row = 0;
  Index worst_col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::string report() const;
};

GradCheckResult grad_check(ParamStore& store,
                           const std::function<double(bool)>& loss_fn,
                           double eps = 1e-5);

// --- checkpoints -------------------------------------------------------

struct Checkpoint {
  std::string model_kind;
  std::vector<std::pair<std::string, std::string>> hyper;  // ordered
  std::uint64_t vocab_hash = 0;
  std::vector<std::pair<std::string, Matrix>> params;      // ordered

  const Matrix& param(const std::string& name) const;
  const std::string& hyper_value(const std::string& key) const;
  bool has_hyper(const std::string& key) const;
};

// Versioned text format; floats printed with 17 significant digits so the
// round trip is bit-exact. load() throws ParseError on corruption and a
// dedicated message on version mismatch; it never returns a partial model.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_store(const ParamStore& store,
                                 const std::string& model_kind,
                                 std::vector<std::pair<std::string, std::string>> hyper,
                                 std::uint64_t vocab_hash);
// Shape- and name-checked; verifies everything before touching the store.
void restore_into_store(const Checkpoint& ck, ParamStore& store);

// --- training log --------------------------------------------------------

// CSV with header "epoch,step,train_loss,val_loss,seconds".
class TrainLog {
 public:
  explicit TrainLog(const std::string& path);
  void record(std::size_t epoch, std::size_t step, double train_loss,
              double val_loss, double seconds);

 private:
  std::string path_;
};

}  // namespace ntx
