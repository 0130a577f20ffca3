#include <ntx/cnn.hpp>

#include <algorithm>
#include <numeric>

namespace ntx {

namespace {

std::string branch_name(Index h, const char* which) {
  return "conv_h" + std::to_string(h) + "_" + which;
}

}  // namespace

Index CnnModel::feature_len(std::size_t branch) const {
  const Index h = cfg.regions.at(branch);
  return (cfg.s - h) / cfg.stride + 1;
}

Index CnnModel::pooled_len() const {
  return cfg.k * cfg.nf * static_cast<Index>(cfg.regions.size());
}

CnnModel make_cnn(const CnnConfig& cfg, Index vocab_size, std::uint64_t seed) {
  require(cfg.s >= 1 && cfg.d >= 1, "cnn: s and d must be positive");
  require(cfg.nf >= 1, "cnn: need at least one filter per branch");
  require(cfg.k >= 1, "cnn: k must be >= 1");
  require(cfg.stride >= 1, "cnn: stride must be >= 1");
  require(cfg.output_dim >= 1, "cnn: output_dim must be >= 1");
  require(!cfg.regions.empty(), "cnn: need at least one region size");
  require(vocab_size >= 1, "cnn: vocabulary must be non-empty");

  CnnModel model;
  model.cfg = cfg;
  model.vocab_size = vocab_size;
  model.store.add("embedding", vocab_size + 1, cfg.d, InitKind::glorot,
                  !cfg.static_embedding, /*mask_row0=*/true);
  for (std::size_t bi = 0; bi < cfg.regions.size(); ++bi) {
    const Index h = cfg.regions[bi];
    require(h >= 1, "cnn: region size must be >= 1");
    require(cfg.s >= h, "cnn: document length " + std::to_string(cfg.s) +
                            " is shorter than region " + std::to_string(h));
    for (std::size_t bj = 0; bj < bi; ++bj)
      require(cfg.regions[bj] != h,
              "cnn: duplicate region size " + std::to_string(h));
    model.store.add(branch_name(h, "W"), cfg.nf, h * cfg.d);
    model.store.add(branch_name(h, "b"), 1, cfg.nf, InitKind::zero);
    const Index len = model.feature_len(bi);
    require(cfg.k <= len, "cnn: k = " + std::to_string(cfg.k) +
                              " exceeds feature-map length " +
                              std::to_string(len) + " of region " +
                              std::to_string(h));
  }
  model.store.add("head_W", cfg.output_dim, model.pooled_len());
  model.store.add("head_b", 1, cfg.output_dim, InitKind::zero);
  init(model.store, seed);
  return model;
}

Matrix conv_forward(const Matrix& a, const Matrix& w, const Vector& b,
                    Index h, Act act, Index stride,
                    bool bias_after_activation) {
  const Index s = a.rows(), d = a.cols();
  require(h >= 1 && stride >= 1, "conv: h and stride must be >= 1");
  if (s < h)
    throw ContractError("conv: document of length " + std::to_string(s) +
                        " is shorter than the h=" + std::to_string(h) +
                        " branch window");
  require(w.cols() == h * d, "conv: filter width " + std::to_string(w.cols()) +
                                 " does not match h*d = " +
                                 std::to_string(h * d));
  require(b.size() == w.rows(), "conv: bias length vs filter count");

  const Index nf = w.rows();
  const Index len = (s - h) / stride + 1;
  Matrix pre(nf, len);
  for (Index i = 0; i < len; ++i) {
    // rows i*stride .. i*stride+h-1 are contiguous in the row-major layout
    Eigen::Map<const Vector> window(a.data() + i * stride * d, h * d);
    pre.col(i).noalias() = w * window;
  }
  if (!bias_after_activation) pre.colwise() += b;
  Matrix out = activation(act, pre);
  if (bias_after_activation) out.colwise() += b;
  return out;
}

Vector kmax_pool(const std::vector<Matrix>& maps, Index k,
                 std::vector<std::vector<std::vector<Index>>>* chosen) {
  require(k >= 1, "kmax_pool: k must be >= 1");
  require(!maps.empty(), "kmax_pool: no feature maps");
  Index total = 0;
  for (const Matrix& m : maps) {
    require(k <= m.cols(), "kmax_pool: k = " + std::to_string(k) +
                               " exceeds feature-map length " +
                               std::to_string(m.cols()));
    total += k * m.rows();
  }
  Vector out(total);
  if (chosen) chosen->assign(maps.size(), {});
  Index slot = 0;
  for (std::size_t bi = 0; bi < maps.size(); ++bi) {
    const Matrix& m = maps[bi];
    if (chosen)
      (*chosen)[bi].assign(static_cast<std::size_t>(m.rows()), {});
    for (Index f = 0; f < m.rows(); ++f) {
      std::vector<Index> cols(static_cast<std::size_t>(m.cols()));
      std::iota(cols.begin(), cols.end(), Index{0});
      // k largest by value (ties to the earlier column), then restore
      // original sequence order
      std::partial_sort(cols.begin(), cols.begin() + k, cols.end(),
                        [&](Index x, Index y) {
                          if (m(f, x) != m(f, y)) return m(f, x) > m(f, y);
                          return x < y;
                        });
      cols.resize(static_cast<std::size_t>(k));
      std::sort(cols.begin(), cols.end());
      for (Index j = 0; j < k; ++j) {
        out(slot++) = m(f, cols[static_cast<std::size_t>(j)]);
      }
      if (chosen) (*chosen)[bi][static_cast<std::size_t>(f)] = cols;
    }
  }
  return out;
}

namespace {

std::pair<ProbVector, CnnCache> forward_impl(const CnnModel& model,
                                             const Matrix& a,
                                             std::vector<int> indices) {
  const CnnConfig& cfg = model.cfg;
  require_shape(a, cfg.s, cfg.d, "cnn_forward input");

  CnnCache cache;
  cache.indices = std::move(indices);
  cache.a = a;
  cache.s = cfg.s;
  cache.d = cfg.d;
  cache.output_dim = cfg.output_dim;

  for (std::size_t bi = 0; bi < cfg.regions.size(); ++bi) {
    const Index h = cfg.regions[bi];
    const Matrix& w = model.store.at(branch_name(h, "W")).value;
    const Vector b =
        model.store.at(branch_name(h, "b")).value.row(0).transpose();

    const Index nf = w.rows();
    const Index len = model.feature_len(bi);
    Matrix pre(nf, len);
    for (Index i = 0; i < len; ++i) {
      Eigen::Map<const Vector> window(a.data() + i * cfg.stride * cfg.d,
                                      h * cfg.d);
      pre.col(i).noalias() = w * window;
    }
    if (!cfg.bias_after_activation) pre.colwise() += b;
    Matrix maps = activation(cfg.activation, pre);
    if (cfg.bias_after_activation) maps.colwise() += b;
    cache.pre.push_back(std::move(pre));
    cache.maps.push_back(std::move(maps));
  }

  cache.pooled = kmax_pool(cache.maps, cfg.k, &cache.pool_idx);

  const Matrix& head_w = model.store.at("head_W").value;
  const Matrix& head_b = model.store.at("head_b").value;
  cache.logits = head_w * cache.pooled + head_b.row(0).transpose();
  cache.head_w00 = head_w(0, 0);
  cache.head_b0 = head_b(0, 0);

  if (cfg.output_dim == 1) {
    const double p = sigmoid(cache.logits(0));
    cache.probs.resize(2);
    cache.probs << 1.0 - p, p;
  } else {
    cache.probs = softmax(cache.logits);
  }
  return {cache.probs, cache};
}

}  // namespace

std::pair<ProbVector, CnnCache> cnn_forward(const CnnModel& model,
                                            const EncodedDoc& doc) {
  require(doc.indices.size() == static_cast<std::size_t>(model.cfg.s),
          "cnn_forward: document length " +
              std::to_string(doc.indices.size()) + " != s = " +
              std::to_string(model.cfg.s));
  Matrix a(model.cfg.s, model.cfg.d);
  const Matrix& table = model.embedding();
  for (std::size_t t = 0; t < doc.indices.size(); ++t) {
    const int idx = doc.indices[t];
    require(idx >= 0 && idx <= model.vocab_size,
            "cnn_forward: token index " + std::to_string(idx) +
                " outside [0, " + std::to_string(model.vocab_size) + "]");
    a.row(static_cast<Index>(t)) = table.row(idx);
  }
  return forward_impl(model, a, doc.indices);
}

std::pair<ProbVector, CnnCache> cnn_forward_matrix(const CnnModel& model,
                                                   const Matrix& a) {
  return forward_impl(model, a, {});
}

namespace {

// Shared backward pass. When accumulate is false only the input gradient is
// produced and no parameter gradient is touched.
Matrix backward_impl(const CnnModel& model, ParamStore* accum,
                     const CnnCache& cache, const Vector& grad_logits) {
  const CnnConfig& cfg = model.cfg;
  // staleness fingerprint: shapes plus two parameter scalars sampled at
  // forward time
  const Matrix& head_w = model.store.at("head_W").value;
  const Matrix& head_b = model.store.at("head_b").value;
  if (cache.s != cfg.s || cache.d != cfg.d ||
      cache.output_dim != cfg.output_dim ||
      cache.pre.size() != cfg.regions.size() ||
      cache.head_w00 != head_w(0, 0) || cache.head_b0 != head_b(0, 0))
    throw ContractError(
        "cnn_backward: cache is stale (model changed since forward)");
  require(grad_logits.size() == cfg.output_dim,
          "cnn_backward: upstream gradient length " +
              std::to_string(grad_logits.size()) + " != output_dim");

  if (accum) {
    accum->at("head_W").grad.noalias() +=
        grad_logits * cache.pooled.transpose();
    accum->at("head_b").grad.row(0) += grad_logits.transpose();
  }

  Vector dpooled = head_w.transpose() * grad_logits;

  Matrix da = Matrix::Zero(cfg.s, cfg.d);
  Index slot = 0;
  for (std::size_t bi = 0; bi < cfg.regions.size(); ++bi) {
    const Index h = cfg.regions[bi];
    const Matrix& w = model.store.at(branch_name(h, "W")).value;

    const Matrix& pre = cache.pre[bi];
    Matrix dmaps = Matrix::Zero(pre.rows(), pre.cols());
    for (Index f = 0; f < pre.rows(); ++f)
      for (Index j = 0; j < cfg.k; ++j)
        dmaps(f, cache.pool_idx[bi][static_cast<std::size_t>(f)]
                                [static_cast<std::size_t>(j)]) +=
            dpooled(slot++);

    Matrix dpre;
    if (cfg.bias_after_activation) {
      // maps = act(pre) + b: bias gradient flows straight from dmaps
      if (accum)
        accum->at(branch_name(h, "b")).grad.row(0) +=
            dmaps.rowwise().sum().transpose();
      Matrix act_out = activation(cfg.activation, pre);
      dpre = dmaps.cwiseProduct(activation_grad(cfg.activation, pre, act_out));
    } else {
      // maps = act(pre), pre already contains the bias
      dpre = dmaps.cwiseProduct(
          activation_grad(cfg.activation, pre, cache.maps[bi]));
      if (accum)
        accum->at(branch_name(h, "b")).grad.row(0) +=
            dpre.rowwise().sum().transpose();
    }

    for (Index i = 0; i < dpre.cols(); ++i) {
      Eigen::Map<const Vector> window(
          cache.a.data() + i * cfg.stride * cfg.d, h * cfg.d);
      if (accum)
        accum->at(branch_name(h, "W")).grad.noalias() +=
            dpre.col(i) * window.transpose();
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>
          dwindow(da.data() + i * cfg.stride * cfg.d, h, cfg.d);
      Vector wback = w.transpose() * dpre.col(i);
      dwindow += Eigen::Map<const Eigen::Matrix<
          double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          wback.data(), h, cfg.d);
    }
  }

  if (accum) {
    Param& emb = accum->at("embedding");
    if (emb.trainable && !cache.indices.empty()) {
      for (std::size_t t = 0; t < cache.indices.size(); ++t) {
        const int idx = cache.indices[t];
        if (idx == 0) continue;  // padding row receives no gradient
        emb.grad.row(idx) += da.row(static_cast<Index>(t));
      }
    }
  }
  return da;
}

}  // namespace

Matrix cnn_backward(CnnModel& model, const CnnCache& cache,
                    const Vector& grad_logits) {
  return backward_impl(model, &model.store, cache, grad_logits);
}

Matrix cnn_input_grad(const CnnModel& model, const CnnCache& cache,
                      const Vector& grad_logits) {
  return backward_impl(model, nullptr, cache, grad_logits);
}

Vector classification_grad(const CnnModel& model, const ProbVector& probs,
                           int label) {
  const Index dim = model.cfg.output_dim;
  if (dim == 1) {
    require(label == 0 || label == 1, "binary label must be 0 or 1");
    Vector g(1);
    g(0) = probs(1) - static_cast<double>(label);  // d(-log p_y)/dz
    return g;
  }
  require(label >= 0 && label < dim, "label " + std::to_string(label) +
                                         " outside [0, " +
                                         std::to_string(dim) + ")");
  Vector g = probs;
  g(label) -= 1.0;
  return g;
}

double classification_loss(const ProbVector& probs, int label) {
  require(label >= 0 && label < probs.size(),
          "label outside the class range");
  const double p = std::clamp(probs(label), 1e-12, 1.0 - 1e-12);
  return -std::log(p);
}

int predicted_class(const ProbVector& probs) {
  Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

CnnParamCount param_count(const CnnModel& model) {
  const CnnConfig& cfg = model.cfg;
  CnnParamCount count;
  if (!cfg.static_embedding)
    count.embedding = static_cast<std::size_t>((model.vocab_size + 1) * cfg.d);
  for (Index h : cfg.regions)
    count.conv += static_cast<std::size_t>(h * cfg.d * cfg.nf + cfg.nf);
  count.head = static_cast<std::size_t>(model.pooled_len() * cfg.output_dim +
                                        cfg.output_dim);
  return count;
}

}  // namespace ntx
