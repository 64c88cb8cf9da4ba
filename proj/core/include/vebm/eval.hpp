#pragma once

// Synthesis-quality metrics and the feature-based classifier.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vebm/energy_model.hpp"
#include "vebm/voxel.hpp"

namespace vebm {

using FeatureVector = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;  // row-major rows

/// Max-pool kernels applied to the outputs of the first two convolution
/// stages (after their ReLU).
struct FeatureConfig {
  std::size_t first_pool = 4;
  std::size_t second_pool = 2;
};

/// Feature length for `arch` under `cfg`. Throws ConfigError if the
/// architecture has fewer than two convolution layers.
std::size_t feature_length(const DescriptorArchitecture& arch, const FeatureConfig& cfg = {});

/// One pooled, concatenated feature vector per sample of `batch`.
Matrix extract_features(const DescriptorModel& model, const Tensor& batch,
                        const FeatureConfig& cfg = {});

struct ClassifierConfig {
  double learning_rate = 0.5;
  double l2 = 1e-3;
  std::size_t epochs = 300;
};

/// Softmax regression over z-scored features.
struct ClassifierModel {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  // 1 / std, 1 for constant features
  Matrix weights;                     // classes × features
  std::vector<double> bias;

  std::size_t classes() const { return bias.size(); }
};

/// Full-batch gradient descent on mean cross-entropy + (l2/2)·||W||².
ClassifierModel train_classifier(const Matrix& features, std::span<const std::size_t> labels,
                                 const ClassifierConfig& cfg = {});

struct Classification {
  std::size_t label = 0;
  std::vector<double> probabilities;
};
Classification classify(const ClassifierModel& model, std::span<const double> feature);

/// exp(mean_i KL(p(c|Y_i) || p̄(c))), p̄ the mean row.
double inception_score(const Matrix& prob_rows);

/// ||μ̃ - μ||² + Tr(Σ̃ + Σ - 2 (Σ̃Σ)^{1/2}), covariances regularised by 1e-6·I.
double fid(const Matrix& real, const Matrix& synthetic);
double fid_from_moments(std::span<const double> mean_a, const Matrix& cov_a,
                        std::span<const double> mean_b, const Matrix& cov_b);

/// Mean |original - recovered| over the masked voxels.
double recovery_error(const VoxelGrid& original, const VoxelGrid& recovered,
                      const CorruptionMask& mask);

/// Mean probability of `target` over the rows.
double softmax_class_prob(const ClassifierModel& model, const Matrix& features,
                          std::size_t target);
/// Fraction of rows whose argmax differs from `target`.
double classification_error(const ClassifierModel& model, const Matrix& features,
                            std::size_t target);

/// `k` indices by ascending squared distance, ties to the lower index.
std::vector<std::size_t> nearest_neighbors(const VoxelGrid& query,
                                           std::span<const VoxelGrid> dataset,
                                           std::size_t k);

struct EvalReport {
  std::optional<double> inception_score;
  std::optional<double> fid;
  std::optional<double> recovery_error;
  std::optional<double> softmax_prob;
  std::optional<double> classification_error;

  /// JSON object holding exactly the fields that are set.
  std::string to_json() const;
};

}  // namespace vebm
