#include <ntx/train.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ntx {

Param& ParamStore::add(const std::string& name, Index rows, Index cols,
                       InitKind init, bool trainable, bool mask_row0) {
  require(!name.empty(), "parameter name must be non-empty");
  require(index_.count(name) == 0, "duplicate parameter name: " + name);
  require(rows >= 1 && cols >= 1, "parameter " + name + " has empty shape");
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  p->trainable = trainable;
  p->mask_row0 = mask_row0;
  p->init = init;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter: " + name);
  return *params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter: " + name);
  return *params_[it->second];
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) > 0;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->trainable) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void init(ParamStore& store, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store.param(i);
    switch (p.init) {
      case InitKind::glorot:
        glorot_fill(p.value, rng);
        break;
      case InitKind::zero:
        p.value.setZero();
        break;
      case InitKind::ones:
        p.value.setOnes();
        break;
    }
    if (p.mask_row0) p.value.row(0).setZero();
    p.grad.setZero();
  }
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer: " + s + " (expected sgd or adam)");
}

Trainer::Trainer(ParamStore& store, TrainConfig config)
    : store_(&store), config_(config) {
  require(config_.learning_rate > 0.0, "learning rate must be > 0");
  m_.resize(store.size());
  v_.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Param& p = store.param(i);
    m_[i] = Matrix::Zero(p.value.rows(), p.value.cols());
    v_[i] = Matrix::Zero(p.value.rows(), p.value.cols());
  }
}

std::size_t Trainer::step() {
  // Reject non-finite gradients before any state is touched.
  for (std::size_t i = 0; i < store_->size(); ++i) {
    Param& p = store_->param(i);
    if (!p.trainable) continue;
    if (!p.grad.allFinite())
      throw ContractError("non-finite gradient in parameter '" + p.name +
                          "' — aborting the update");
  }

  // Masked rows must not influence the norm or receive updates.
  for (std::size_t i = 0; i < store_->size(); ++i) {
    Param& p = store_->param(i);
    if (p.mask_row0) p.grad.row(0).setZero();
  }

  double sq_norm = 0.0;
  for (std::size_t i = 0; i < store_->size(); ++i) {
    const Param& p = store_->param(i);
    if (p.trainable) sq_norm += p.grad.squaredNorm();
  }
  const double norm = std::sqrt(sq_norm);
  double scale = 1.0;
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm)
    scale = config_.clip_norm / norm;

  ++t_;
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));

  std::size_t updated = 0;
  for (std::size_t i = 0; i < store_->size(); ++i) {
    Param& p = store_->param(i);
    if (!p.trainable) {
      p.grad.setZero();
      continue;
    }
    Matrix g = p.grad * scale;
    switch (config_.optimizer) {
      case Optimizer::sgd:
        p.value.noalias() -= config_.learning_rate * g;
        break;
      case Optimizer::adam: {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
        Matrix mhat = m_[i] / bc1;
        Matrix vhat = v_[i] / bc2;
        p.value.array() -= config_.learning_rate * mhat.array() /
                           (vhat.array().sqrt() + adam_eps);
        break;
      }
    }
    if (p.mask_row0) p.value.row(0).setZero();
    updated += static_cast<std::size_t>(p.value.size());
    p.grad.setZero();
  }
  return updated;
}

std::string GradCheckResult::report() const {
  std::ostringstream out;
  out << "max relative error " << max_rel_err << " at " << worst_param << "("
      << worst_row << "," << worst_col << "): analytic " << analytic
      << ", numeric " << numeric;
  return out.str();
}

GradCheckResult grad_check(ParamStore& store,
                           const std::function<double(bool)>& loss_fn,
                           double eps) {
  require(eps > 0.0, "grad_check: eps must be positive");
  store.zero_grads();
  (void)loss_fn(true);

  std::vector<Matrix> analytic(store.size());
  for (std::size_t i = 0; i < store.size(); ++i)
    analytic[i] = store.param(i).grad;

  GradCheckResult result;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store.param(i);
    if (!p.trainable) continue;
    for (Index r = 0; r < p.value.rows(); ++r) {
      if (p.mask_row0 && r == 0) continue;
      for (Index c = 0; c < p.value.cols(); ++c) {
        const double saved = p.value(r, c);
        p.value(r, c) = saved + eps;
        const double up = loss_fn(false);
        p.value(r, c) = saved - eps;
        const double down = loss_fn(false);
        p.value(r, c) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i](r, c);
        const double denom =
            std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > result.max_rel_err) {
          result.max_rel_err = rel;
          result.worst_param = p.name;
          result.worst_row = r;
          result.worst_col = c;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  store.zero_grads();
  return result;
}

// --- checkpoints ---------------------------------------------------------

namespace {
constexpr const char* kCkptHeader = "NEUROTEXT-CKPT v1";
}

const Matrix& Checkpoint::param(const std::string& name) const {
  for (const auto& [n, m] : params)
    if (n == name) return m;
  throw ContractError("checkpoint has no parameter named " + name);
}

const std::string& Checkpoint::hyper_value(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return v;
  throw ContractError("checkpoint has no hyperparameter named " + key);
}

bool Checkpoint::has_hyper(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return true;
  return false;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << kCkptHeader << '\n';
  out << "model " << ck.model_kind << '\n';
  out << "vocab_hash " << ck.vocab_hash << '\n';
  for (const auto& [k, v] : ck.hyper) out << "hyper " << k << ' ' << v << '\n';
  out << "params " << ck.params.size() << '\n';
  char buf[64];
  for (const auto& [name, m] : ck.params) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
        out << buf << (c + 1 == m.cols() ? "" : " ");
      }
      out << '\n';
    }
  }
  require(out.good(), "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path + ": empty checkpoint file");
  if (line != kCkptHeader) {
    if (line.rfind("NEUROTEXT-CKPT", 0) == 0)
      throw ParseError(path + ": unsupported checkpoint version \"" + line +
                       "\" (this build reads \"" + kCkptHeader +
                       "\" only; refusing to upgrade)");
    throw ParseError(path + ": not a checkpoint file (bad header)");
  }

  Checkpoint ck;
  std::size_t n_params = 0;
  bool saw_params = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "model") {
      if (!(ls >> ck.model_kind))
        throw ParseError(path + ": malformed model line");
    } else if (key == "vocab_hash") {
      if (!(ls >> ck.vocab_hash))
        throw ParseError(path + ": malformed vocab_hash line");
    } else if (key == "hyper") {
      std::string k, v;
      if (!(ls >> k >> v)) throw ParseError(path + ": malformed hyper line");
      ck.hyper.emplace_back(k, v);
    } else if (key == "params") {
      if (!(ls >> n_params))
        throw ParseError(path + ": malformed params line");
      saw_params = true;
      break;
    } else {
      throw ParseError(path + ": unexpected line \"" + line + "\"");
    }
  }
  if (!saw_params) throw ParseError(path + ": missing params section");
  if (ck.model_kind.empty()) throw ParseError(path + ": missing model line");

  for (std::size_t i = 0; i < n_params; ++i) {
    if (!std::getline(in, line))
      throw ParseError(path + ": truncated (expected parameter block " +
                       std::to_string(i + 1) + " of " +
                       std::to_string(n_params) + ")");
    std::istringstream hs(line);
    std::string name;
    Index rows = 0, cols = 0;
    if (!(hs >> name >> rows >> cols) || rows < 1 || cols < 1)
      throw ParseError(path + ": malformed parameter header \"" + line + "\"");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line))
        throw ParseError(path + ": truncated inside parameter " + name);
      std::istringstream rs(line);
      for (Index c = 0; c < cols; ++c) {
        if (!(rs >> m(r, c)))
          throw ParseError(path + ": bad float in parameter " + name +
                           " row " + std::to_string(r));
      }
      double extra;
      if (rs >> extra)
        throw ParseError(path + ": too many floats in parameter " + name +
                         " row " + std::to_string(r));
    }
    ck.params.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

Checkpoint checkpoint_from_store(
    const ParamStore& store, const std::string& model_kind,
    std::vector<std::pair<std::string, std::string>> hyper,
    std::uint64_t vocab_hash) {
  Checkpoint ck;
  ck.model_kind = model_kind;
  ck.hyper = std::move(hyper);
  ck.vocab_hash = vocab_hash;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Param& p = store.param(i);
    ck.params.emplace_back(p.name, p.value);
  }
  return ck;
}

void restore_into_store(const Checkpoint& ck, ParamStore& store) {
  require(ck.params.size() == store.size(),
          "checkpoint holds " + std::to_string(ck.params.size()) +
              " parameters but the model has " + std::to_string(store.size()));
  // Verify names and shapes first so a mismatch never leaves the store
  // half-written.
  for (const auto& [name, m] : ck.params) {
    const Param& p = store.at(name);
    require(p.value.rows() == m.rows() && p.value.cols() == m.cols(),
            "checkpoint parameter " + name + " has shape " + shape_str(m) +
                " but the model expects " + shape_str(p.value));
  }
  for (const auto& [name, m] : ck.params) {
    Param& p = store.at(name);
    p.value = m;
    p.grad.setZero();
  }
}

// --- training log ----------------------------------------------------------

TrainLog::TrainLog(const std::string& path) : path_(path) {
  std::ofstream out(path_);
  require(out.good(), "cannot open for writing: " + path_);
  out << "epoch,step,train_loss,val_loss,seconds\n";
}

void TrainLog::record(std::size_t epoch, std::size_t step, double train_loss,
                      double val_loss, double seconds) {
  std::ofstream out(path_, std::ios::app);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.3f\n", epoch, step,
                train_loss, val_loss, seconds);
  out << buf;
}

}  // namespace ntx
