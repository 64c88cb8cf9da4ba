#include "vebm/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace vebm {
namespace {

// Layer indices whose outputs feed the two pooled feature blocks: the ReLU
// following each of the first two convolutions, or the convolution itself.
std::pair<std::size_t, std::size_t> feature_layers(const DescriptorArchitecture& arch) {
  std::vector<std::size_t> picks;
  const auto& layers = arch.layers;
  for (std::size_t i = 0; i < layers.size() && picks.size() < 2; ++i) {
    if (layers[i].kind != LayerKind::kConv3d) continue;
    const bool relu_next = i + 1 < layers.size() && layers[i + 1].kind == LayerKind::kRelu;
    picks.push_back(relu_next ? i + 1 : i);
  }
  if (picks.size() < 2) {
    throw ConfigError("feature extraction needs a descriptor with >= 2 convolution layers");
  }
  return {picks[0], picks[1]};
}

std::size_t pooled_volume(const Shape& s, std::size_t k) {
  auto c = [k](std::size_t n) { return (n + k - 1) / k; };
  return s[0] * c(s[1]) * c(s[2]) * c(s[3]);
}

}  // namespace

std::size_t feature_length(const DescriptorArchitecture& arch, const FeatureConfig& cfg) {
  const auto [a, b] = feature_layers(arch);
  // Shapes follow from the same lowering the model uses.
  const NetworkLayout net = build_network(arch.layers, {1, arch.grid.d, arch.grid.h, arch.grid.w},
                                          "f", "Y");
  return pooled_volume(net.layer_shapes[a], cfg.first_pool) +
         pooled_volume(net.layer_shapes[b], cfg.second_pool);
}

Matrix extract_features(const DescriptorModel& model, const Tensor& batch,
                        const FeatureConfig& cfg) {
  const auto [a, b] = feature_layers(model.architecture());
  const NodeId na = model.layout().layer_outputs[a];
  const NodeId nb = model.layout().layer_outputs[b];
  const NodeId outs[] = {na, nb};
  const Values<float> v = forward(model.graph(), model.bind(batch), outs);
  const Tensor pa = maxpool3d(v[na], cfg.first_pool).y;
  const Tensor pb = maxpool3d(v[nb], cfg.second_pool).y;
  const std::size_t n = batch.dim(0);
  const std::size_t la = pa.size() / n, lb = pb.size() / n;
  Matrix out(n, FeatureVector(la + lb));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(pa.raw() + i * la, pa.raw() + (i + 1) * la, out[i].begin());
    std::copy(pb.raw() + i * lb, pb.raw() + (i + 1) * lb,
              out[i].begin() + static_cast<std::ptrdiff_t>(la));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat to_eigen(const Matrix& rows, std::size_t cols) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ShapeError("feature rows have differing lengths");
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void softmax_rows(Mat& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
}

Mat standardized(const ClassifierModel& model, const Matrix& features) {
  const std::size_t f = model.feature_mean.size();
  Mat x = to_eigen(features, f);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    x.col(j) = (x.col(j).array() - model.feature_mean[static_cast<std::size_t>(j)]) *
               model.feature_scale[static_cast<std::size_t>(j)];
  }
  return x;
}

Mat probabilities(const ClassifierModel& model, const Matrix& features) {
  const Mat x = standardized(model, features);
  Mat w(static_cast<Eigen::Index>(model.classes()),
        static_cast<Eigen::Index>(model.feature_mean.size()));
  for (std::size_t c = 0; c < model.classes(); ++c) {
    for (std::size_t j = 0; j < model.feature_mean.size(); ++j) {
      w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = model.weights[c][j];
    }
  }
  Mat logits = x * w.transpose();
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    logits.col(c).array() += model.bias[static_cast<std::size_t>(c)];
  }
  softmax_rows(logits);
  return logits;
}

}  // namespace

ClassifierModel train_classifier(const Matrix& features, std::span<const std::size_t> labels,
                                 const ClassifierConfig& cfg) {
  if (features.empty() || features.size() != labels.size()) {
    throw ShapeError("classifier needs one label per feature row");
  }
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<bool> seen(classes, false);
  for (std::size_t l : labels) seen[l] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw ConfigError("classifier needs at least two classes in the training data");
  }
  const std::size_t n = features.size(), f = features.front().size();

  ClassifierModel model;
  model.feature_mean.assign(f, 0.0);
  model.feature_scale.assign(f, 1.0);
  const Mat raw = to_eigen(features, f);
  for (std::size_t j = 0; j < f; ++j) {
    const auto col = raw.col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    model.feature_mean[j] = mean;
    model.feature_scale[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  const Mat x = standardized(model, features);

  Mat onehot = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < n; ++i) {
    onehot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  Mat w = Mat::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(f));
  Vec b = Vec::Zero(static_cast<Eigen::Index>(classes));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Mat p = x * w.transpose();
    p.rowwise() += b.transpose();
    softmax_rows(p);
    const Mat diff = (p - onehot) * inv_n;
    w -= cfg.learning_rate * (diff.transpose() * x + cfg.l2 * w);
    b -= cfg.learning_rate * diff.colwise().sum().transpose();
  }

  model.weights.assign(classes, std::vector<double>(f));
  model.bias.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    model.bias[c] = b(static_cast<Eigen::Index>(c));
    for (std::size_t j = 0; j < f; ++j) {
      model.weights[c][j] = w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
    }
  }
  return model;
}

Classification classify(const ClassifierModel& model, std::span<const double> feature) {
  const Matrix row{FeatureVector(feature.begin(), feature.end())};
  const Mat p = probabilities(model, row);
  Classification c;
  c.probabilities.assign(p.data(), p.data() + p.size());
  c.label = static_cast<std::size_t>(
      std::max_element(c.probabilities.begin(), c.probabilities.end()) -
      c.probabilities.begin());
  return c;
}

double softmax_class_prob(const ClassifierModel& model, const Matrix& features,
                          std::size_t target) {
  if (target >= model.classes()) throw ConfigError("unknown class " + std::to_string(target));
  if (features.empty()) throw ShapeError("no samples to score");
  const Mat p = probabilities(model, features);
  return p.col(static_cast<Eigen::Index>(target)).mean();
}

double classification_error(const ClassifierModel& model, const Matrix& features,
                            std::size_t target) {
  if (target >= model.classes()) throw ConfigError("unknown class " + std::to_string(target));
  if (features.empty()) throw ShapeError("no samples to score");
  const Mat p = probabilities(model, features);
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    if (static_cast<std::size_t>(best) != target) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(p.rows());
}

// ---------------------------------------------------------------------------

double inception_score(const Matrix& rows) {
  if (rows.empty()) throw ShapeError("inception score needs at least one row");
  const std::size_t c = rows.front().size();
  std::vector<double> marginal(c, 0.0);
  for (const FeatureVector& r : rows) {
    if (r.size() != c) throw ShapeError("probability rows have differing lengths");
    double sum = 0.0;
    for (double p : r) {
      if (!(p >= 0.0)) throw ConfigError("probability rows must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("probability rows must sum to 1");
    for (std::size_t k = 0; k < c; ++k) marginal[k] += r[k];
  }
  for (double& m : marginal) m /= static_cast<double>(rows.size());
  double kl = 0.0;
  for (const FeatureVector& r : rows) {
    for (std::size_t k = 0; k < c; ++k) {
      if (r[k] > 0.0) kl += r[k] * (std::log(r[k]) - std::log(marginal[k]));
    }
  }
  return std::exp(kl / static_cast<double>(rows.size()));
}

namespace {

constexpr double kCovRidge = 1e-6;

void moments(const Matrix& rows, Vec& mean, Mat& cov) {
  if (rows.empty()) throw ShapeError("FID needs non-empty feature sets");
  const Mat x = to_eigen(rows, rows.front().size());
  mean = x.colwise().mean().transpose();
  const Mat centred = x.rowwise() - mean.transpose();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  cov = centred.transpose() * centred / denom;
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> e(m);
  const Vec root = e.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return e.eigenvectors() * root.asDiagonal() * e.eigenvectors().transpose();
}

double fid_eigen(const Vec& ma, const Mat& ca_in, const Vec& mb, const Mat& cb_in) {
  if (ma.size() != mb.size()) throw ShapeError("FID feature dimensions differ");
  const Mat eye = Mat::Identity(ma.size(), ma.size());
  const Mat ca = ca_in + kCovRidge * eye;
  const Mat cb = cb_in + kCovRidge * eye;
  // Tr((Σa^{1/2} Σb Σa^{1/2})^{1/2}) is the sum of the singular values of
  // Σb^{1/2} Σa^{1/2}; working with the roots keeps ridge-sized directions
  // accurate instead of squaring them.
  const Mat product = psd_sqrt(cb) * psd_sqrt(ca);
  Eigen::BDCSVD<Mat> svd(product);
  const double tr_sqrt = svd.singularValues().sum();
  const double value = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

}  // namespace

double fid(const Matrix& real, const Matrix& synthetic) {
  Vec ma, mb;
  Mat ca, cb;
  moments(real, ma, ca);
  moments(synthetic, mb, cb);
  return fid_eigen(ma, ca, mb, cb);
}

double fid_from_moments(std::span<const double> mean_a, const Matrix& cov_a,
                        std::span<const double> mean_b, const Matrix& cov_b) {
  const Vec ma = Eigen::Map<const Vec>(mean_a.data(), static_cast<Eigen::Index>(mean_a.size()));
  const Vec mb = Eigen::Map<const Vec>(mean_b.data(), static_cast<Eigen::Index>(mean_b.size()));
  return fid_eigen(ma, to_eigen(cov_a, mean_a.size()), mb, to_eigen(cov_b, mean_b.size()));
}

double recovery_error(const VoxelGrid& original, const VoxelGrid& recovered,
                      const CorruptionMask& mask) {
  if (!(original.extents() == recovered.extents()) ||
      !(original.extents() == mask.extents())) {
    throw ShapeError("recovery error: extents differ");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (!mask.is_free(i)) continue;
    acc += std::abs(static_cast<double>(original.values()[i]) - recovered.values()[i]);
    ++count;
  }
  if (count == 0) throw ConfigError("recovery error needs a non-empty mask");
  return acc / static_cast<double>(count);
}

std::vector<std::size_t> nearest_neighbors(const VoxelGrid& query,
                                           std::span<const VoxelGrid> dataset,
                                           std::size_t k) {
  if (k > dataset.size()) {
    throw ConfigError("asked for " + std::to_string(k) + " neighbours from " +
                      std::to_string(dataset.size()) + " grids");
  }
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!(dataset[i].extents() == query.extents())) {
      throw ShapeError("nearest neighbours: extents differ");
    }
    double d = 0.0;
    for (std::size_t v = 0; v < query.size(); ++v) {
      const double diff = static_cast<double>(query.values()[v]) - dataset[i].values()[v];
      d += diff * diff;
    }
    dist.emplace_back(d, i);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (inception_score) j["inception_score"] = *inception_score;
  if (fid) j["fid"] = *fid;
  if (recovery_error) j["recovery_error"] = *recovery_error;
  if (softmax_prob) j["softmax_prob"] = *softmax_prob;
  if (classification_error) j["classification_error"] = *classification_error;
  return j.dump(2);
}

}  // namespace vebm
