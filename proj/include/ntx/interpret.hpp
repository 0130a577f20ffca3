#pragma once

#include <ntx/cnn.hpp>

#include <string>
#include <vector>

namespace ntx {

// One row per document: the pooled pre-head vector (the model's document
// encoding). Pure function of (parameters, documents).
Matrix doc_embeddings(const CnnModel& model,
                      const std::vector<EncodedDoc>& docs);

// PCA of mean-centered rows onto the top two principal components.
// Deterministic sign convention: each component's largest-magnitude loading
// is made positive. Throws ContractError for fewer than 3 rows or rank-0
// input (all rows equal).
Matrix project_2d(const Matrix& embeddings);

struct RegionScore {
  int doc_id = 0;
  Index start = 0;  // word offset of the receptive field
  Index h = 0;      // region length
  double norm = 0.0;
  std::vector<std::string> text;  // region tokens, empty without a vocabulary
};

// Euclidean norms of every receptive field's post-activation embedding
// (the feature-map columns), sorted descending; ties resolved by
// (position, h). top_n == 0 or beyond the region count returns all.
std::vector<RegionScore> predictive_regions(const CnnModel& model,
                                            const EncodedDoc& doc,
                                            std::size_t top_n,
                                            const Vocabulary* vocab = nullptr,
                                            int doc_id = 0);

// Mean silhouette coefficient over all points with Euclidean distances:
// s_i = (b_i - a_i) / max(a_i, b_i), a_i the mean distance to the point's
// own cluster (0 for singletons, which score 0 by convention), b_i the
// smallest mean distance to any other cluster. Needs at least two distinct
// labels; higher means better-separated clusters.
double silhouette(const Matrix& points, const std::vector<int>& labels);

enum class SaliencyReduce { l2, max_abs };

struct SaliencyMap {
  int doc_id = 0;
  std::vector<double> scores;  // per word, padding excluded
  int predicted = -1;
  int true_label = -1;
};

// |d logit(predicted class) / d a_t| per word, reduced over the d embedding
// components (L2 by default, max-abs on request). A single backward pass of
// the class score, not the loss; parameter gradients are left untouched.
SaliencyMap saliency(const CnnModel& model, const EncodedDoc& doc,
                     SaliencyReduce reduce = SaliencyReduce::l2,
                     int true_label = -1, int doc_id = 0);

// The raw s x d input-gradient matrix behind the map (for verification).
Matrix saliency_input_grad(const CnnModel& model, const EncodedDoc& doc);

// --- reports ---------------------------------------------------------------

// CSV "doc_id,start,h,norm,text"
void write_region_csv(const std::vector<RegionScore>& regions,
                      const std::string& path);
// CSV "doc_id,position,token,score"
void write_saliency_csv(const SaliencyMap& map,
                        const std::vector<std::string>& tokens,
                        const std::string& path);

}  // namespace ntx
