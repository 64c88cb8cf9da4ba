#include "vebm/kernels.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

namespace vebm {
namespace {

template <typename T>
using RowMatrix =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

using Index = std::ptrdiff_t;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_string(shape));
  }
}

std::size_t cubic_kernel(const Shape& w, const char* what) {
  require_rank(w, 5, what);
  if (w[2] != w[3] || w[2] != w[4] || w[2] == 0) {
    throw ShapeError(std::string(what) + ": filters must be cubic, got " +
                     shape_string(w));
  }
  return w[2];
}

void require_bias(const Shape* bias, std::size_t channels, const char* what) {
  if (bias != nullptr && (bias->size() != 1 || (*bias)[0] != channels)) {
    throw ShapeError(std::string(what) + ": bias must have " +
                     std::to_string(channels) + " entries");
  }
}

// Unfold one sample [C, D, H, W] into cols [C * k^3, P_out].
template <typename T>
void im2col(const T* x, std::size_t channels, const ConvGeometry& g, T* cols) {
  const Index k = static_cast<Index>(g.kernel);
  const Index s = static_cast<Index>(g.stride);
  const Index id = static_cast<Index>(g.in.d), ih = static_cast<Index>(g.in.h),
              iw = static_cast<Index>(g.in.w);
  const Index od = static_cast<Index>(g.out.d), oh = static_cast<Index>(g.out.h),
              ow = static_cast<Index>(g.out.w);
  const Index pd = static_cast<Index>(g.pad_front.d),
              ph = static_cast<Index>(g.pad_front.h),
              pw = static_cast<Index>(g.pad_front.w);
  const Index plane = od * oh * ow;
  T* dst = cols;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x + c * g.in.volume();
    for (Index kz = 0; kz < k; ++kz) {
      for (Index ky = 0; ky < k; ++ky) {
        for (Index kx = 0; kx < k; ++kx) {
          T* out = dst;
          for (Index oz = 0; oz < od; ++oz) {
            const Index iz = oz * s + kz - pd;
            if (iz < 0 || iz >= id) {
              std::fill(out, out + oh * ow, T{0});
              out += oh * ow;
              continue;
            }
            for (Index oy = 0; oy < oh; ++oy) {
              const Index iy = oy * s + ky - ph;
              if (iy < 0 || iy >= ih) {
                std::fill(out, out + ow, T{0});
                out += ow;
                continue;
              }
              const T* row = xc + (iz * ih + iy) * iw;
              for (Index ox = 0; ox < ow; ++ox) {
                const Index ix = ox * s + kx - pw;
                *out++ = (ix >= 0 && ix < iw) ? row[ix] : T{0};
              }
            }
          }
          dst += plane;
        }
      }
    }
  }
}

// Fold cols [C * k^3, P_out] back into one sample [C, D, H, W], accumulating.
template <typename T>
void col2im(const T* cols, std::size_t channels, const ConvGeometry& g, T* x) {
  const Index k = static_cast<Index>(g.kernel);
  const Index s = static_cast<Index>(g.stride);
  const Index id = static_cast<Index>(g.in.d), ih = static_cast<Index>(g.in.h),
              iw = static_cast<Index>(g.in.w);
  const Index od = static_cast<Index>(g.out.d), oh = static_cast<Index>(g.out.h),
              ow = static_cast<Index>(g.out.w);
  const Index pd = static_cast<Index>(g.pad_front.d),
              ph = static_cast<Index>(g.pad_front.h),
              pw = static_cast<Index>(g.pad_front.w);
  const T* src = cols;
  for (std::size_t c = 0; c < channels; ++c) {
    T* xc = x + c * g.in.volume();
    for (Index kz = 0; kz < k; ++kz) {
      for (Index ky = 0; ky < k; ++ky) {
        for (Index kx = 0; kx < k; ++kx) {
          const T* in = src;
          for (Index oz = 0; oz < od; ++oz) {
            const Index iz = oz * s + kz - pd;
            if (iz < 0 || iz >= id) {
              in += oh * ow;
              continue;
            }
            for (Index oy = 0; oy < oh; ++oy) {
              const Index iy = oy * s + ky - ph;
              if (iy < 0 || iy >= ih) {
                in += ow;
                continue;
              }
              T* row = xc + (iz * ih + iy) * iw;
              for (Index ox = 0; ox < ow; ++ox, ++in) {
                const Index ix = ox * s + kx - pw;
                if (ix >= 0 && ix < iw) row[ix] += *in;
              }
            }
          }
          src += od * oh * ow;
        }
      }
    }
  }
}

template <typename T>
void add_channel_bias(T* y, const BasicTensor<T>& bias, std::size_t channels,
                      std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T b = bias[c];
    T* yc = y + c * plane;
    for (std::size_t p = 0; p < plane; ++p) yc[p] += b;
  }
}

template <typename T>
BasicTensor<T> channel_bias_grad(const BasicTensor<T>& dy) {
  const std::size_t n = dy.dim(0), c = dy.dim(1);
  const std::size_t plane = dy.size() / (n * c);
  BasicTensor<T> db({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = dy.raw() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) acc += src[p];
    }
    db[ch] = static_cast<T>(acc);
  }
  return db;
}

}  // namespace

Extent3 spatial_extent(const Shape& shape) {
  require_rank(shape, 5, "spatial_extent");
  return {shape[2], shape[3], shape[4]};
}

ConvGeometry ConvGeometry::same(Extent3 in, std::size_t kernel,
                                std::size_t stride) {
  if (kernel < 1 || stride < 1) {
    throw ShapeError("kernel and stride must be at least 1");
  }
  ConvGeometry g;
  g.in = in;
  g.kernel = kernel;
  g.stride = stride;
  g.out = {ceil_div(in.d, stride), ceil_div(in.h, stride),
           ceil_div(in.w, stride)};
  auto front = [&](std::size_t n, std::size_t o) -> std::size_t {
    const std::size_t need = (o - 1) * stride + kernel;
    return need > n ? (need - n) / 2 : 0;
  };
  g.pad_front = {front(in.d, g.out.d), front(in.h, g.out.h),
                 front(in.w, g.out.w)};
  return g;
}

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>* bias, std::size_t stride) {
  require_rank(x.shape(), 5, "conv3d input");
  const std::size_t k = cubic_kernel(w.shape(), "conv3d");
  const std::size_t n = x.dim(0), c_in = x.dim(1), c_out = w.dim(0);
  if (w.dim(1) != c_in) {
    throw ShapeError("conv3d: filters expect " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(c_in));
  }
  require_bias(bias ? &bias->shape() : nullptr, c_out, "conv3d");
  const ConvGeometry g = ConvGeometry::same(spatial_extent(x.shape()), k, stride);
  const std::size_t rows = c_in * k * k * k;
  const std::size_t plane = g.out.volume();
  BasicTensor<T> y({n, c_out, g.out.d, g.out.h, g.out.w});
  ConstMatMap<T> wm(w.raw(), static_cast<Index>(c_out), static_cast<Index>(rows));

#pragma omp parallel for schedule(static) if (n > 1)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    std::vector<T> cols(rows * plane);
    im2col(x.raw() + i * c_in * g.in.volume(), c_in, g, cols.data());
    MatMap<T> ym(y.raw() + i * c_out * plane, static_cast<Index>(c_out),
                 static_cast<Index>(plane));
    ym.noalias() = wm * ConstMatMap<T>(cols.data(), static_cast<Index>(rows),
                                       static_cast<Index>(plane));
    if (bias) add_channel_bias(y.raw() + i * c_out * plane, *bias, c_out, plane);
  }
  return y;
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                             bool has_bias, std::size_t stride,
                             const BasicTensor<T>& dy) {
  const std::size_t k = cubic_kernel(w.shape(), "conv3d_backward");
  const std::size_t n = x.dim(0), c_in = x.dim(1), c_out = w.dim(0);
  const ConvGeometry g = ConvGeometry::same(spatial_extent(x.shape()), k, stride);
  const std::size_t rows = c_in * k * k * k;
  const std::size_t plane = g.out.volume();
  if (dy.shape() != Shape{n, c_out, g.out.d, g.out.h, g.out.w}) {
    throw ShapeError("conv3d_backward: upstream gradient shape " +
                     shape_string(dy.shape()));
  }
  ConvGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape()), {}};
  ConstMatMap<T> wm(w.raw(), static_cast<Index>(c_out), static_cast<Index>(rows));

#pragma omp parallel for schedule(static) if (n > 1)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    RowMatrix<T> dcols =
        wm.transpose() * ConstMatMap<T>(dy.raw() + i * c_out * plane,
                                        static_cast<Index>(c_out),
                                        static_cast<Index>(plane));
    col2im(dcols.data(), c_in, g, grads.dx.raw() + i * c_in * g.in.volume());
  }

  // Filter gradient summed over samples in a fixed order.
  MatMap<T> dwm(grads.dw.raw(), static_cast<Index>(c_out), static_cast<Index>(rows));
  std::vector<T> cols(rows * plane);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.raw() + i * c_in * g.in.volume(), c_in, g, cols.data());
    dwm.noalias() += ConstMatMap<T>(dy.raw() + i * c_out * plane,
                                    static_cast<Index>(c_out),
                                    static_cast<Index>(plane)) *
                     ConstMatMap<T>(cols.data(), static_cast<Index>(rows),
                                    static_cast<Index>(plane))
                         .transpose();
  }
  if (has_bias) grads.db = channel_bias_grad(dy);
  return grads;
}

namespace {

ConvGeometry deconv_geometry(const Shape& x, std::size_t kernel,
                             std::size_t up_factor) {
  if (up_factor < 1) throw ShapeError("deconv3d: up_factor must be >= 1");
  const Extent3 in = spatial_extent(x);
  // The matching forward convolution maps the upsampled grid back to `in`.
  return ConvGeometry::same(
      {in.d * up_factor, in.h * up_factor, in.w * up_factor}, kernel, up_factor);
}

}  // namespace

template <typename T>
BasicTensor<T> deconv3d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                        const BasicTensor<T>* bias, std::size_t up_factor) {
  require_rank(x.shape(), 5, "deconv3d input");
  const std::size_t k = cubic_kernel(w.shape(), "deconv3d");
  const std::size_t n = x.dim(0), c_in = x.dim(1), c_out = w.dim(1);
  if (w.dim(0) != c_in) {
    throw ShapeError("deconv3d: filters expect " + std::to_string(w.dim(0)) +
                     " input channels, input has " + std::to_string(c_in));
  }
  require_bias(bias ? &bias->shape() : nullptr, c_out, "deconv3d");
  const ConvGeometry g = deconv_geometry(x.shape(), k, up_factor);
  const std::size_t rows = c_out * k * k * k;
  const std::size_t plane = g.out.volume();  // == input spatial volume
  BasicTensor<T> y({n, c_out, g.in.d, g.in.h, g.in.w});
  ConstMatMap<T> wm(w.raw(), static_cast<Index>(c_in), static_cast<Index>(rows));

#pragma omp parallel for schedule(static) if (n > 1)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    RowMatrix<T> cols =
        wm.transpose() * ConstMatMap<T>(x.raw() + i * c_in * plane,
                                        static_cast<Index>(c_in),
                                        static_cast<Index>(plane));
    col2im(cols.data(), c_out, g, y.raw() + i * c_out * g.in.volume());
    if (bias) {
      add_channel_bias(y.raw() + i * c_out * g.in.volume(), *bias, c_out,
                       g.in.volume());
    }
  }
  return y;
}

template <typename T>
ConvGrads<T> deconv3d_backward(const BasicTensor<T>& x,
                               const BasicTensor<T>& w, bool has_bias,
                               std::size_t up_factor,
                               const BasicTensor<T>& dy) {
  const std::size_t k = cubic_kernel(w.shape(), "deconv3d_backward");
  const std::size_t n = x.dim(0), c_in = x.dim(1), c_out = w.dim(1);
  const ConvGeometry g = deconv_geometry(x.shape(), k, up_factor);
  const std::size_t rows = c_out * k * k * k;
  const std::size_t plane = g.out.volume();
  if (dy.shape() != Shape{n, c_out, g.in.d, g.in.h, g.in.w}) {
    throw ShapeError("deconv3d_backward: upstream gradient shape " +
                     shape_string(dy.shape()));
  }
  ConvGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape()), {}};
  ConstMatMap<T> wm(w.raw(), static_cast<Index>(c_in), static_cast<Index>(rows));

#pragma omp parallel for schedule(static) if (n > 1)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    std::vector<T> cols(rows * plane);
    im2col(dy.raw() + i * c_out * g.in.volume(), c_out, g, cols.data());
    MatMap<T> dxm(grads.dx.raw() + i * c_in * plane, static_cast<Index>(c_in),
                  static_cast<Index>(plane));
    dxm.noalias() = wm * ConstMatMap<T>(cols.data(), static_cast<Index>(rows),
                                        static_cast<Index>(plane));
  }

  MatMap<T> dwm(grads.dw.raw(), static_cast<Index>(c_in), static_cast<Index>(rows));
  std::vector<T> cols(rows * plane);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(dy.raw() + i * c_out * g.in.volume(), c_out, g, cols.data());
    dwm.noalias() += ConstMatMap<T>(x.raw() + i * c_in * plane,
                                    static_cast<Index>(c_in),
                                    static_cast<Index>(plane)) *
                     ConstMatMap<T>(cols.data(), static_cast<Index>(rows),
                                    static_cast<Index>(plane))
                         .transpose();
  }
  if (has_bias) grads.db = channel_bias_grad(dy);
  return grads;
}

template <typename T>
MaxPoolResult<T> maxpool3d(const BasicTensor<T>& x, std::size_t kernel) {
  require_rank(x.shape(), 5, "maxpool3d input");
  if (kernel < 1) throw ShapeError("maxpool3d: kernel must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const Extent3 in = spatial_extent(x.shape());
  const Extent3 out{ceil_div(in.d, kernel), ceil_div(in.h, kernel),
                    ceil_div(in.w, kernel)};
  MaxPoolResult<T> r{BasicTensor<T>({n, c, out.d, out.h, out.w}), {}};
  r.argmax.resize(r.y.size());
  std::size_t o = 0;
  for (std::size_t slab = 0; slab < n * c; ++slab) {
    const std::size_t base = slab * in.volume();
    for (std::size_t oz = 0; oz < out.d; ++oz) {
      for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox, ++o) {
          std::size_t best = std::numeric_limits<std::size_t>::max();
          for (std::size_t z = oz * kernel; z < std::min(in.d, (oz + 1) * kernel); ++z) {
            for (std::size_t y = oy * kernel; y < std::min(in.h, (oy + 1) * kernel); ++y) {
              for (std::size_t xx = ox * kernel; xx < std::min(in.w, (ox + 1) * kernel); ++xx) {
                const std::size_t idx = base + (z * in.h + y) * in.w + xx;
                if (best == std::numeric_limits<std::size_t>::max() || x[idx] > x[best]) {
                  best = idx;
                }
              }
            }
          }
          r.argmax[o] = best;
          r.y[o] = x[best];
        }
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool3d_backward(const Shape& x_shape,
                                  const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& dy) {
  if (argmax.size() != dy.size()) {
    throw ShapeError("maxpool3d_backward: argmax/gradient size mismatch");
  }
  BasicTensor<T> dx(x_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
  return dx;
}

template <typename T>
BatchNormResult<T> batchnorm3d(const BasicTensor<T>& x,
                               const BasicTensor<T>& gamma,
                               const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean,
                               const BasicTensor<T>& running_var,
                               BatchNormMode mode, double eps) {
  require_rank(x.shape(), 5, "batchnorm3d input");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.size() / (n * c);
  for (const auto* t : {&gamma, &beta, &running_mean, &running_var}) {
    if (t->shape() != Shape{c}) {
      throw ShapeError("batchnorm3d: per-channel tensors must have shape [" +
                       std::to_string(c) + "]");
    }
  }
  BatchNormResult<T> r{BasicTensor<T>(x.shape()), BasicTensor<T>({c}),
                       BasicTensor<T>({c})};
  if (mode == BatchNormMode::kTraining) {
    if (n < 2) {
      throw ShapeError("batchnorm3d: training mode needs a batch of at least 2");
    }
    const double count = static_cast<double>(n * plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.raw() + (i * c + ch) * plane;
        for (std::size_t p = 0; p < plane; ++p) sum += src[p];
      }
      const double mean = sum / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.raw() + (i * c + ch) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = src[p] - mean;
          sq += d * d;
        }
      }
      r.mean[ch] = static_cast<T>(mean);
      r.var[ch] = static_cast<T>(sq / count);
    }
  } else {
    r.mean = running_mean;
    r.var = running_var;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(r.var[ch]) + eps);
      const double scale = gamma[ch] * inv;
      const double shift = beta[ch] - scale * r.mean[ch];
      const T* src = x.raw() + (i * c + ch) * plane;
      T* dst = r.y.raw() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        dst[p] = static_cast<T>(scale * src[p] + shift);
      }
    }
  }
  return r;
}

template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& x,
                                       const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& mean,
                                       const BasicTensor<T>& var,
                                       BatchNormMode mode, double eps,
                                       const BasicTensor<T>& dy) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.size() / (n * c);
  const double count = static_cast<double>(n * plane);
  BatchNormGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>({c}),
                      BasicTensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[ch]) + eps);
    const double mu = mean[ch];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const T* xs = x.raw() + (i * c + ch) * plane;
      const T* ds = dy.raw() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum_dy += ds[p];
        sum_dy_xhat += ds[p] * (xs[p] - mu) * inv;
      }
    }
    g.dbeta[ch] = static_cast<T>(sum_dy);
    g.dgamma[ch] = static_cast<T>(sum_dy_xhat);
    const double gm = gamma[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const T* xs = x.raw() + (i * c + ch) * plane;
      const T* ds = dy.raw() + (i * c + ch) * plane;
      T* dx = g.dx.raw() + (i * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        if (mode == BatchNormMode::kTraining) {
          const double xhat = (xs[p] - mu) * inv;
          dx[p] = static_cast<T>(gm * inv / count *
                                 (count * ds[p] - sum_dy - xhat * sum_dy_xhat));
        } else {
          dx[p] = static_cast<T>(gm * inv * ds[p]);
        }
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& x,
                               const BasicTensor<T>& w,
                               const BasicTensor<T>* bias) {
  if (x.rank() < 2) throw ShapeError("fully_connected: input needs a batch axis");
  require_rank(w.shape(), 2, "fully_connected filters");
  const std::size_t n = x.dim(0), features = x.size() / n, out = w.dim(0);
  if (w.dim(1) != features) {
    throw ShapeError("fully_connected: filters expect " +
                     std::to_string(w.dim(1)) + " features, input has " +
                     std::to_string(features));
  }
  require_bias(bias ? &bias->shape() : nullptr, out, "fully_connected");
  BasicTensor<T> y({n, out});
  MatMap<T> ym(y.raw(), static_cast<Index>(n), static_cast<Index>(out));
  ym.noalias() = ConstMatMap<T>(x.raw(), static_cast<Index>(n),
                                static_cast<Index>(features)) *
                 ConstMatMap<T>(w.raw(), static_cast<Index>(out),
                                static_cast<Index>(features))
                     .transpose();
  if (bias) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < out; ++o) y[i * out + o] += (*bias)[o];
    }
  }
  return y;
}

template <typename T>
ConvGrads<T> fully_connected_backward(const BasicTensor<T>& x,
                                      const BasicTensor<T>& w, bool has_bias,
                                      const BasicTensor<T>& dy) {
  const std::size_t n = x.dim(0), features = x.size() / n, out = w.dim(0);
  if (dy.shape() != Shape{n, out}) {
    throw ShapeError("fully_connected_backward: upstream gradient shape " +
                     shape_string(dy.shape()));
  }
  ConvGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape()), {}};
  ConstMatMap<T> dym(dy.raw(), static_cast<Index>(n), static_cast<Index>(out));
  ConstMatMap<T> xm(x.raw(), static_cast<Index>(n), static_cast<Index>(features));
  ConstMatMap<T> wm(w.raw(), static_cast<Index>(out), static_cast<Index>(features));
  MatMap<T>(g.dx.raw(), static_cast<Index>(n), static_cast<Index>(features))
      .noalias() = dym * wm;
  MatMap<T>(g.dw.raw(), static_cast<Index>(out), static_cast<Index>(features))
      .noalias() = dym.transpose() * xm;
  if (has_bias) {
    g.db = BasicTensor<T>({out});
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += dy[i * out + o];
      g.db[o] = static_cast<T>(acc);
    }
  }
  return g;
}

#define VEBM_INSTANTIATE_KERNELS(T)                                            \
  template BasicTensor<T> conv3d(const BasicTensor<T>&, const BasicTensor<T>&, \
                                 const BasicTensor<T>*, std::size_t);          \
  template ConvGrads<T> conv3d_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&, bool,           \
                                        std::size_t, const BasicTensor<T>&);   \
  template BasicTensor<T> deconv3d(const BasicTensor<T>&,                      \
                                   const BasicTensor<T>&,                      \
                                   const BasicTensor<T>*, std::size_t);        \
  template ConvGrads<T> deconv3d_backward(const BasicTensor<T>&,               \
                                          const BasicTensor<T>&, bool,         \
                                          std::size_t, const BasicTensor<T>&); \
  template MaxPoolResult<T> maxpool3d(const BasicTensor<T>&, std::size_t);     \
  template BasicTensor<T> maxpool3d_backward(                                  \
      const Shape&, const std::vector<std::size_t>&, const BasicTensor<T>&);   \
  template BatchNormResult<T> batchnorm3d(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
      const BasicTensor<T>&, const BasicTensor<T>&, BatchNormMode, double);    \
  template BatchNormGrads<T> batchnorm3d_backward(                             \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
      const BasicTensor<T>&, BatchNormMode, double, const BasicTensor<T>&);    \
  template BasicTensor<T> fully_connected(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*);    \
  template ConvGrads<T> fully_connected_backward(                              \
      const BasicTensor<T>&, const BasicTensor<T>&, bool, const BasicTensor<T>&);

VEBM_INSTANTIATE_KERNELS(float)
VEBM_INSTANTIATE_KERNELS(double)

#undef VEBM_INSTANTIATE_KERNELS

}  // namespace vebm
