#include <ntx/interpret.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <limits>

namespace ntx {

Matrix doc_embeddings(const CnnModel& model,
                      const std::vector<EncodedDoc>& docs) {
  require(!docs.empty(), "doc_embeddings: no documents");
  Matrix out(static_cast<Index>(docs.size()), model.pooled_len());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto [probs, cache] = cnn_forward(model, docs[i]);
    out.row(static_cast<Index>(i)) = cache.pooled.transpose();
  }
  return out;
}

Matrix project_2d(const Matrix& embeddings) {
  const Index n = embeddings.rows(), p = embeddings.cols();
  require(n >= 3, "project_2d: need at least 3 documents");
  require(p >= 2, "project_2d: need at least 2 dimensions");

  Matrix centered = embeddings.rowwise() - embeddings.colwise().mean();
  if (centered.cwiseAbs().maxCoeff() == 0.0)
    throw ContractError("project_2d: degenerate input (all rows equal)");

  Matrix cov = centered.transpose() * centered /
               static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  require(solver.info() == Eigen::Success, "project_2d: eigensolver failed");

  // eigenvalues come out ascending; the top two components are the last
  Matrix components(p, 2);
  components.col(0) = solver.eigenvectors().col(p - 1);
  components.col(1) = solver.eigenvectors().col(p - 2);
  for (Index c = 0; c < 2; ++c) {
    Index argmax = 0;
    components.col(c).cwiseAbs().maxCoeff(&argmax);
    if (components(argmax, c) < 0.0) components.col(c) = -components.col(c);
  }
  return centered * components;
}

double silhouette(const Matrix& points, const std::vector<int>& labels) {
  const Index n = points.rows();
  require(n == static_cast<Index>(labels.size()),
          "silhouette: one label per point required");
  require(n >= 2, "silhouette: need at least 2 points");

  std::vector<int> distinct(labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  require(distinct.size() >= 2, "silhouette: need at least 2 clusters");

  auto cluster_of = [&](int label) {
    return static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), label) -
        distinct.begin());
  };
  std::vector<std::size_t> sizes(distinct.size(), 0);
  for (int l : labels) ++sizes[cluster_of(l)];

  double total = 0.0;
  std::vector<double> mean_dist(distinct.size());
  for (Index i = 0; i < n; ++i) {
    const std::size_t own = cluster_of(labels[i]);
    if (sizes[own] == 1) continue;  // singleton scores 0
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[cluster_of(labels[j])] +=
          (points.row(i) - points.row(j)).norm();
    }
    double a = 0.0, b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < distinct.size(); ++c) {
      if (sizes[c] == 0) continue;
      if (c == own) {
        a = mean_dist[c] / static_cast<double>(sizes[c] - 1);
      } else {
        b = std::min(b, mean_dist[c] / static_cast<double>(sizes[c]));
      }
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

std::vector<RegionScore> predictive_regions(const CnnModel& model,
                                            const EncodedDoc& doc,
                                            std::size_t top_n,
                                            const Vocabulary* vocab,
                                            int doc_id) {
  auto [probs, cache] = cnn_forward(model, doc);
  std::vector<RegionScore> regions;
  for (std::size_t bi = 0; bi < model.cfg.regions.size(); ++bi) {
    const Index h = model.cfg.regions[bi];
    const Matrix& maps = cache.maps[bi];
    for (Index i = 0; i < maps.cols(); ++i) {
      RegionScore r;
      r.doc_id = doc_id;
      r.start = i * model.cfg.stride;
      r.h = h;
      r.norm = maps.col(i).norm();
      if (vocab) {
        for (Index t = r.start; t < r.start + h; ++t) {
          const int idx = doc.indices[static_cast<std::size_t>(t)];
          r.text.push_back(idx == 0 ? "<pad>" : vocab->token_at(idx));
        }
      }
      regions.push_back(std::move(r));
    }
  }
  std::sort(regions.begin(), regions.end(),
            [](const RegionScore& a, const RegionScore& b) {
              if (a.norm != b.norm) return a.norm > b.norm;
              if (a.start != b.start) return a.start < b.start;
              return a.h < b.h;
            });
  if (top_n > 0 && top_n < regions.size()) regions.resize(top_n);
  return regions;
}

Matrix saliency_input_grad(const CnnModel& model, const EncodedDoc& doc) {
  auto [probs, cache] = cnn_forward(model, doc);
  Vector grad_logits;
  if (model.cfg.output_dim == 1) {
    // |dz/da| equals |d(-z)/da|: one neuron serves both classes
    grad_logits = Vector::Ones(1);
  } else {
    grad_logits = Vector::Zero(model.cfg.output_dim);
    grad_logits(predicted_class(probs)) = 1.0;
  }
  return cnn_input_grad(model, cache, grad_logits);
}

SaliencyMap saliency(const CnnModel& model, const EncodedDoc& doc,
                     SaliencyReduce reduce, int true_label, int doc_id) {
  auto [probs, cache] = cnn_forward(model, doc);
  Matrix da = saliency_input_grad(model, doc);

  SaliencyMap map;
  map.doc_id = doc_id;
  map.predicted = model.cfg.output_dim == 1 ? (probs(1) >= 0.5 ? 1 : 0)
                                            : predicted_class(probs);
  map.true_label = true_label;
  const std::size_t words =
      std::min(doc.original_length, doc.indices.size());
  for (std::size_t t = 0; t < words; ++t) {
    const Index row = static_cast<Index>(t);
    map.scores.push_back(reduce == SaliencyReduce::l2
                             ? da.row(row).norm()
                             : da.row(row).cwiseAbs().maxCoeff());
  }
  return map;
}

void write_region_csv(const std::vector<RegionScore>& regions,
                      const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "doc_id,start,h,norm,text\n";
  for (const RegionScore& r : regions) {
    out << r.doc_id << ',' << r.start << ',' << r.h << ',' << r.norm << ",\"";
    for (std::size_t i = 0; i < r.text.size(); ++i)
      out << (i ? " " : "") << r.text[i];
    out << "\"\n";
  }
}

void write_saliency_csv(const SaliencyMap& map,
                        const std::vector<std::string>& tokens,
                        const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "doc_id,position,token,score\n";
  for (std::size_t t = 0; t < map.scores.size(); ++t) {
    out << map.doc_id << ',' << t << ','
        << (t < tokens.size() ? tokens[t] : "") << ',' << map.scores[t]
        << '\n';
  }
}

}  // namespace ntx
