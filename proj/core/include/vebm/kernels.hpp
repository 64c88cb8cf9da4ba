#pragma once

// Volumetric layer kernels over batched tensors laid out as [N, C, D, H, W].
//
// Every kernel is a pure function of its arguments. Backward routines take
// the upstream gradient `dy` and return gradients for each differentiable
// argument. Instantiated for float and double.

#include <cstddef>
#include <vector>

#include "vebm/tensor.hpp"

namespace vebm {

struct Extent3 {
  std::size_t d = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t volume() const { return d * h * w; }
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

/// Zero-padded "SAME" geometry for a cubic kernel: out = ceil(in / stride),
/// with the total padding split so that the smaller half goes in front.
struct ConvGeometry {
  Extent3 in;
  Extent3 out;
  Extent3 pad_front;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  static ConvGeometry same(Extent3 in, std::size_t kernel, std::size_t stride);
};

Extent3 spatial_extent(const Shape& shape);

enum class BatchNormMode { kTraining, kInference };

template <typename T>
struct ConvGrads {
  BasicTensor<T> dx;
  BasicTensor<T> dw;
  BasicTensor<T> db;  // empty when the layer has no bias
};

/// y[n, o] = b[o] + sum_i w[o, i] (*) x[n, i], filters shaped [C_out, C_in, k, k, k].
template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>* bias, std::size_t stride);

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                             bool has_bias, std::size_t stride,
                             const BasicTensor<T>& dy);

/// Transposed convolution; filters shaped [C_in, C_out, k, k, k]. Without bias
/// this is exactly the adjoint of conv3d with the same filters and stride.
template <typename T>
BasicTensor<T> deconv3d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                        const BasicTensor<T>* bias, std::size_t up_factor);

template <typename T>
ConvGrads<T> deconv3d_backward(const BasicTensor<T>& x,
                               const BasicTensor<T>& w, bool has_bias,
                               std::size_t up_factor, const BasicTensor<T>& dy);

template <typename T>
struct MaxPoolResult {
  BasicTensor<T> y;
  std::vector<std::size_t> argmax;  // linear input index per output cell
};

/// Non-overlapping max pooling with ceil partition at the borders. Ties go
/// to the lowest linear index.
template <typename T>
MaxPoolResult<T> maxpool3d(const BasicTensor<T>& x, std::size_t kernel);

template <typename T>
BasicTensor<T> maxpool3d_backward(const Shape& x_shape,
                                  const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& dy);

template <typename T>
struct BatchNormResult {
  BasicTensor<T> y;
  BasicTensor<T> mean;  // per channel statistics actually used
  BasicTensor<T> var;
};

template <typename T>
BatchNormResult<T> batchnorm3d(const BasicTensor<T>& x,
                               const BasicTensor<T>& gamma,
                               const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean,
                               const BasicTensor<T>& running_var,
                               BatchNormMode mode, double eps);

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> dx;
  BasicTensor<T> dgamma;
  BasicTensor<T> dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& x,
                                       const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& mean,
                                       const BasicTensor<T>& var,
                                       BatchNormMode mode, double eps,
                                       const BasicTensor<T>& dy);

/// x is flattened per sample: [N, F] -> [N, O] with w shaped [O, F].
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& x,
                               const BasicTensor<T>& w,
                               const BasicTensor<T>* bias);

template <typename T>
ConvGrads<T> fully_connected_backward(const BasicTensor<T>& x,
                                      const BasicTensor<T>& w, bool has_bias,
                                      const BasicTensor<T>& dy);

}  // namespace vebm
