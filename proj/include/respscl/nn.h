#pragma once

// Differentiable layers: each layer owns its parameters, parameter gradients
// and the forward-pass cache its backward pass needs. Forward/backward are
// deterministic for a fixed worker count; heavy kernels are Eigen GEMMs over
// im2col buffers, parallelized over the batch with per-worker accumulators
// reduced in worker order.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "respscl/common.h"
#include "respscl/tensor.h"

namespace respscl {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
  bool is_norm = false;  // batch-norm gain/bias (excluded from weight decay)
};

template <typename T>
using ParamVisitor = std::function<void(const ParamRef<T>&)>;

namespace detail {

template <typename T>
void im2col(const T* x, int ch, int h, int w, int k, int pad, EMat<T>& cols) {
  cols.resize(static_cast<int64_t>(ch) * k * k, static_cast<int64_t>(h) * w);
  for (int c = 0; c < ch; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int64_t row = (static_cast<int64_t>(c) * k + ki) * k + kj;
        T* dst = cols.data() + row * h * w;
        const T* src_plane = x + static_cast<int64_t>(c) * h * w;
        for (int i = 0; i < h; ++i) {
          const int si = i + ki - pad;
          if (si < 0 || si >= h) {
            std::fill(dst, dst + w, T{0});
            dst += w;
            continue;
          }
          const T* src = src_plane + static_cast<int64_t>(si) * w;
          for (int j = 0; j < w; ++j) {
            const int sj = j + kj - pad;
            *dst++ = (sj >= 0 && sj < w) ? src[sj] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const EMat<T>& cols, int ch, int h, int w, int k, int pad, T* dx) {
  for (int c = 0; c < ch; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int64_t row = (static_cast<int64_t>(c) * k + ki) * k + kj;
        const T* src = cols.data() + row * h * w;
        T* dst_plane = dx + static_cast<int64_t>(c) * h * w;
        for (int i = 0; i < h; ++i) {
          const int si = i + ki - pad;
          if (si < 0 || si >= h) {
            src += w;
            continue;
          }
          T* dst = dst_plane + static_cast<int64_t>(si) * w;
          for (int j = 0; j < w; ++j) {
            const int sj = j + kj - pad;
            if (sj >= 0 && sj < w) {
              dst[sj] += src[j];
            }
          }
          src += w;
        }
      }
    }
  }
}

}  // namespace detail

// 2D convolution, stride 1, same padding, no bias (a batch-norm follows).
template <typename T>
class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int ksize)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        k_(ksize),
        pad_(ksize / 2),
        weight_({out_ch, static_cast<int64_t>(in_ch) * ksize * ksize}),
        wgrad_({out_ch, static_cast<int64_t>(in_ch) * ksize * ksize}) {
    if (ksize <= 0 || ksize % 2 == 0) {
      throw std::invalid_argument("Conv2d: kernel size must be odd and positive");
    }
  }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_) * k_ * k_);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : weight_.data) {
      v = static_cast<T>(u(rng));
    }
  }

  Tensor<T> forward(const Tensor<T>& x, int workers) {
    const auto [b, c, h, w] = dims4(x);
    if (c != in_ch_) {
      throw std::invalid_argument("Conv2d: expected " + std::to_string(in_ch_) +
                                  " input channels, got " + std::to_string(c));
    }
    input_ = x;
    Tensor<T> out({b, out_ch_, h, w});
    const int64_t hw = h * w;
    const int64_t in_plane = static_cast<int64_t>(in_ch_) * hw;
    const int64_t out_plane = static_cast<int64_t>(out_ch_) * hw;
    auto wmat = weight_.as_matrix(out_ch_, static_cast<int64_t>(in_ch_) * k_ * k_);
    parallel_for(b, workers, [&](int64_t lo, int64_t hi, int) {
      EMat<T> cols;
      for (int64_t s = lo; s < hi; ++s) {
        detail::im2col(x.ptr() + s * in_plane, in_ch_, static_cast<int>(h),
                       static_cast<int>(w), k_, pad_, cols);
        EMatMap<T> om(out.ptr() + s * out_plane, out_ch_, hw);
        om.noalias() = wmat * cols;
      }
    });
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, int workers) {
    if (input_.empty()) {
      throw std::runtime_error("Conv2d: backward called before forward");
    }
    const auto [b, oc, h, w] = dims4(gout);
    const int64_t hw = h * w;
    const int64_t in_plane = static_cast<int64_t>(in_ch_) * hw;
    const int64_t out_plane = static_cast<int64_t>(out_ch_) * hw;
    auto wmat = weight_.as_matrix(out_ch_, static_cast<int64_t>(in_ch_) * k_ * k_);

    Tensor<T> dx(input_.shape);
    const int used = std::max(1, std::min<int>(workers, static_cast<int>(b)));
    std::vector<EMat<T>> wacc(static_cast<size_t>(used));
    for (auto& m : wacc) {
      m = EMat<T>::Zero(out_ch_, static_cast<int64_t>(in_ch_) * k_ * k_);
    }
    parallel_for(b, used, [&](int64_t lo, int64_t hi, int worker) {
      EMat<T> cols, dcols;
      for (int64_t s = lo; s < hi; ++s) {
        EMatCMap<T> gm(gout.ptr() + s * out_plane, out_ch_, hw);
        // weight gradient: dW += gout_s * cols_s^T
        detail::im2col(input_.ptr() + s * in_plane, in_ch_, static_cast<int>(h),
                       static_cast<int>(w), k_, pad_, cols);
        wacc[static_cast<size_t>(worker)].noalias() += gm * cols.transpose();
        // data gradient: dcols = W^T * gout_s, scattered back
        dcols.noalias() = wmat.transpose() * gm;
        detail::col2im_add(dcols, in_ch_, static_cast<int>(h), static_cast<int>(w), k_,
                           pad_, dx.ptr() + s * in_plane);
      }
    });
    auto wg = wgrad_.as_matrix(out_ch_, static_cast<int64_t>(in_ch_) * k_ * k_);
    for (const auto& m : wacc) {
      wg += m;
    }
    return dx;
  }

  int64_t param_count() const { return weight_.numel(); }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn({prefix + ".weight", &weight_, &wgrad_, false});
  }

 private:
  static std::array<int64_t, 4> dims4(const Tensor<T>& t) {
    if (t.rank() != 4) {
      throw std::invalid_argument("expected a [B,C,H,W] tensor, got " + t.shape_str());
    }
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  }

  int in_ch_, out_ch_, k_, pad_;
  Tensor<T> weight_, wgrad_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels)
      : ch_(channels),
        gamma_({channels}),
        beta_({channels}),
        ggrad_({channels}),
        bgrad_({channels}),
        running_mean_({channels}),
        running_var_({channels}) {
    init_state();
  }

  void init_state() {
    std::fill(gamma_.data.begin(), gamma_.data.end(), T{1});
    beta_.set_zero();
    running_mean_.set_zero();
    std::fill(running_var_.data.begin(), running_var_.data.end(), T{1});
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, int workers) {
    const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != ch_) {
      throw std::invalid_argument("BatchNorm2d: channel mismatch");
    }
    input_ = x;
    train_cached_ = train;
    mu_.assign(static_cast<size_t>(ch_), 0);
    invstd_.assign(static_cast<size_t>(ch_), 0);
    const int64_t m = b * h * w;
    const int64_t plane = h * w;
    Tensor<T> out(x.shape);

    parallel_for(ch_, workers, [&](int64_t lo, int64_t hi, int) {
      for (int64_t cc = lo; cc < hi; ++cc) {
        double mean, var;
        if (train) {
          double sum = 0, sq = 0;
          for (int64_t s = 0; s < b; ++s) {
            const T* p = x.ptr() + (s * c + cc) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              sum += p[i];
              sq += static_cast<double>(p[i]) * p[i];
            }
          }
          mean = sum / static_cast<double>(m);
          var = std::max(0.0, sq / static_cast<double>(m) - mean * mean);
          const double unbiased = m > 1 ? var * m / static_cast<double>(m - 1) : var;
          running_mean_.data[cc] = static_cast<T>(
              (1 - momentum_) * running_mean_.data[cc] + momentum_ * mean);
          running_var_.data[cc] = static_cast<T>(
              (1 - momentum_) * running_var_.data[cc] + momentum_ * unbiased);
        } else {
          mean = running_mean_.data[cc];
          var = running_var_.data[cc];
        }
        const double invstd = 1.0 / std::sqrt(var + eps_);
        mu_[static_cast<size_t>(cc)] = static_cast<T>(mean);
        invstd_[static_cast<size_t>(cc)] = static_cast<T>(invstd);
        const T g = gamma_.data[cc], bb = beta_.data[cc];
        const T a = static_cast<T>(g * invstd);
        const T off = static_cast<T>(bb - g * invstd * mean);
        for (int64_t s = 0; s < b; ++s) {
          const T* p = x.ptr() + (s * c + cc) * plane;
          T* q = out.ptr() + (s * c + cc) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            q[i] = a * p[i] + off;
          }
        }
      }
    });
    return out;
  }

  Tensor<T> backward(const Tensor<T>& gout, int workers) {
    if (input_.empty()) {
      throw std::runtime_error("BatchNorm2d: backward called before forward");
    }
    const int64_t b = gout.dim(0), c = gout.dim(1), h = gout.dim(2), w = gout.dim(3);
    const int64_t m = b * h * w;
    const int64_t plane = h * w;
    Tensor<T> dx(gout.shape);

    parallel_for(ch_, workers, [&](int64_t lo, int64_t hi, int) {
      for (int64_t cc = lo; cc < hi; ++cc) {
        const double mean = mu_[static_cast<size_t>(cc)];
        const double invstd = invstd_[static_cast<size_t>(cc)];
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int64_t s = 0; s < b; ++s) {
          const T* px = input_.ptr() + (s * c + cc) * plane;
          const T* pg = gout.ptr() + (s * c + cc) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const double xhat = (px[i] - mean) * invstd;
            sum_dy += pg[i];
            sum_dy_xhat += pg[i] * xhat;
          }
        }
        ggrad_.data[cc] += static_cast<T>(sum_dy_xhat);
        bgrad_.data[cc] += static_cast<T>(sum_dy);
        const double g = gamma_.data[cc];
        for (int64_t s = 0; s < b; ++s) {
          const T* px = input_.ptr() + (s * c + cc) * plane;
          const T* pg = gout.ptr() + (s * c + cc) * plane;
          T* pd = dx.ptr() + (s * c + cc) * plane;
          if (train_cached_) {
            for (int64_t i = 0; i < plane; ++i) {
              const double xhat = (px[i] - mean) * invstd;
              pd[i] = static_cast<T>(
                  g * invstd *
                  (pg[i] - sum_dy / static_cast<double>(m) -
                   xhat * sum_dy_xhat / static_cast<double>(m)));
            }
          } else {
            for (int64_t i = 0; i < plane; ++i) {
              pd[i] = static_cast<T>(g * invstd * pg[i]);
            }
          }
        }
      }
    });
    return dx;
  }

  int64_t param_count() const { return 2 * ch_; }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn({prefix + ".gamma", &gamma_, &ggrad_, true});
    fn({prefix + ".beta", &beta_, &bgrad_, true});
  }
  void visit_state(const std::string& prefix,
                   const std::function<void(const std::string&, Tensor<T>*)>& fn) {
    fn(prefix + ".running_mean", &running_mean_);
    fn(prefix + ".running_var", &running_var_);
  }

 private:
  int ch_;
  T momentum_ = static_cast<T>(0.1);
  double eps_ = 1e-5;
  Tensor<T> gamma_, beta_, ggrad_, bgrad_, running_mean_, running_var_;
  Tensor<T> input_;
  std::vector<T> mu_, invstd_;
  bool train_cached_ = false;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    output_ = x;
    for (auto& v : output_.data) {
      v = std::max(v, T{0});
    }
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& gout) const {
    if (output_.empty()) {
      throw std::runtime_error("Relu: backward called before forward");
    }
    Tensor<T> dx(gout.shape);
    for (int64_t i = 0; i < gout.numel(); ++i) {
      dx.data[static_cast<size_t>(i)] =
          output_.data[static_cast<size_t>(i)] > T{0}
              ? gout.data[static_cast<size_t>(i)]
              : T{0};
    }
    return dx;
  }

 private:
  Tensor<T> output_;
};

// 2x2 average pooling, stride 2; trailing odd rows/columns are dropped.
template <typename T>
class AvgPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape;
    const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t ho = h / 2, wo = w / 2;
    if (ho == 0 || wo == 0) {
      throw std::invalid_argument("AvgPool2: input too small to pool");
    }
    Tensor<T> out({b, c, ho, wo});
    for (int64_t s = 0; s < b * c; ++s) {
      const T* p = x.ptr() + s * h * w;
      T* q = out.ptr() + s * ho * wo;
      for (int64_t i = 0; i < ho; ++i) {
        for (int64_t j = 0; j < wo; ++j) {
          q[i * wo + j] = static_cast<T>(
              0.25 * (p[2 * i * w + 2 * j] + p[2 * i * w + 2 * j + 1] +
                      p[(2 * i + 1) * w + 2 * j] + p[(2 * i + 1) * w + 2 * j + 1]));
        }
      }
    }
    return out;
  }
  Tensor<T> backward(const Tensor<T>& gout) const {
    if (in_shape_.empty()) {
      throw std::runtime_error("AvgPool2: backward called before forward");
    }
    Tensor<T> dx(in_shape_);
    const int64_t b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const int64_t ho = h / 2, wo = w / 2;
    for (int64_t s = 0; s < b * c; ++s) {
      const T* g = gout.ptr() + s * ho * wo;
      T* d = dx.ptr() + s * h * w;
      for (int64_t i = 0; i < ho; ++i) {
        for (int64_t j = 0; j < wo; ++j) {
          const T v = static_cast<T>(0.25 * g[i * wo + j]);
          d[2 * i * w + 2 * j] += v;
          d[2 * i * w + 2 * j + 1] += v;
          d[(2 * i + 1) * w + 2 * j] += v;
          d[(2 * i + 1) * w + 2 * j + 1] += v;
        }
      }
    }
    return dx;
  }

 private:
  std::vector<int64_t> in_shape_;
};

enum class GlobalPoolMode { Mean, MeanPlusMax };

// Collapses [B,C,H,W] to [B,C]. MeanPlusMax averages over the frequency axis
// first, then adds the time-wise mean and max of that profile; Mean is a
// plain global average.
template <typename T>
class GlobalPool {
 public:
  explicit GlobalPool(GlobalPoolMode mode) : mode_(mode) {}

  EMat<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape;
    const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    EMat<T> emb(b, c);
    if (mode_ == GlobalPoolMode::Mean) {
      for (int64_t s = 0; s < b; ++s) {
        for (int64_t cc = 0; cc < c; ++cc) {
          const T* p = x.ptr() + (s * c + cc) * h * w;
          double sum = 0;
          for (int64_t i = 0; i < h * w; ++i) {
            sum += p[i];
          }
          emb(s, cc) = static_cast<T>(sum / static_cast<double>(h * w));
        }
      }
      return emb;
    }
    argmax_.assign(static_cast<size_t>(b * c), 0);
    for (int64_t s = 0; s < b; ++s) {
      for (int64_t cc = 0; cc < c; ++cc) {
        const T* p = x.ptr() + (s * c + cc) * h * w;
        double mean_all = 0;
        double best = -std::numeric_limits<double>::infinity();
        int64_t best_t = 0;
        for (int64_t t = 0; t < w; ++t) {
          double col = 0;
          for (int64_t i = 0; i < h; ++i) {
            col += p[i * w + t];
          }
          col /= static_cast<double>(h);
          mean_all += col;
          if (col > best) {
            best = col;
            best_t = t;
          }
        }
        mean_all /= static_cast<double>(w);
        emb(s, cc) = static_cast<T>(mean_all + best);
        argmax_[static_cast<size_t>(s * c + cc)] = best_t;
      }
    }
    return emb;
  }

  Tensor<T> backward(const EMat<T>& demb) const {
    if (in_shape_.empty()) {
      throw std::runtime_error("GlobalPool: backward called before forward");
    }
    const int64_t b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    Tensor<T> dx(in_shape_);
    for (int64_t s = 0; s < b; ++s) {
      for (int64_t cc = 0; cc < c; ++cc) {
        T* d = dx.ptr() + (s * c + cc) * h * w;
        const T g = demb(s, cc);
        if (mode_ == GlobalPoolMode::Mean) {
          const T v = static_cast<T>(g / static_cast<double>(h * w));
          for (int64_t i = 0; i < h * w; ++i) {
            d[i] = v;
          }
        } else {
          const T vmean = static_cast<T>(g / static_cast<double>(h * w));
          for (int64_t i = 0; i < h * w; ++i) {
            d[i] = vmean;
          }
          const int64_t t = argmax_[static_cast<size_t>(s * c + cc)];
          const T vmax = static_cast<T>(g / static_cast<double>(h));
          for (int64_t i = 0; i < h; ++i) {
            d[i * w + t] += vmax;
          }
        }
      }
    }
    return dx;
  }

 private:
  GlobalPoolMode mode_;
  std::vector<int64_t> in_shape_;
  std::vector<int64_t> argmax_;
};

template <typename T>
class Linear {
 public:
  Linear(int in_dim, int out_dim)
      : in_(in_dim),
        out_(out_dim),
        weight_({out_dim, in_dim}),
        bias_({out_dim}),
        wgrad_({out_dim, in_dim}),
        bgrad_({out_dim}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : weight_.data) {
      v = static_cast<T>(u(rng));
    }
    for (auto& v : bias_.data) {
      v = static_cast<T>(u(rng));
    }
  }

  EMat<T> forward(const EMat<T>& x) {
    if (x.cols() != in_) {
      throw std::invalid_argument("Linear: expected input dim " + std::to_string(in_) +
                                  ", got " + std::to_string(x.cols()));
    }
    input_ = x;
    auto wmat = weight_.as_matrix(out_, in_);
    EMat<T> out = x * wmat.transpose();
    auto bvec = EMatCMap<T>(bias_.ptr(), 1, out_);
    out.rowwise() += bvec.row(0);
    return out;
  }

  EMat<T> backward(const EMat<T>& gout) {
    if (input_.rows() == 0) {
      throw std::runtime_error("Linear: backward called before forward");
    }
    auto wg = wgrad_.as_matrix(out_, in_);
    wg.noalias() += gout.transpose() * input_;
    auto bg = EMatMap<T>(bgrad_.ptr(), 1, out_);
    bg.row(0) += gout.colwise().sum();
    auto wmat = weight_.as_matrix(out_, in_);
    return gout * wmat;
  }

  int64_t param_count() const { return weight_.numel() + bias_.numel(); }
  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn({prefix + ".weight", &weight_, &wgrad_, false});
    fn({prefix + ".bias", &bias_, &bgrad_, false});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Tensor<T> weight_, bias_, wgrad_, bgrad_;
  EMat<T> input_;
};

// Row-wise L2 normalization with a small norm floor.
template <typename T>
class L2NormalizeRows {
 public:
  EMat<T> forward(const EMat<T>& x) {
    norms_.resize(x.rows());
    output_.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const T n = std::max(x.row(i).norm(), static_cast<T>(1e-12));
      norms_(i) = n;
      output_.row(i) = x.row(i) / n;
    }
    return output_;
  }
  EMat<T> backward(const EMat<T>& gout) const {
    if (output_.rows() == 0) {
      throw std::runtime_error("L2NormalizeRows: backward called before forward");
    }
    EMat<T> dx(gout.rows(), gout.cols());
    for (Eigen::Index i = 0; i < gout.rows(); ++i) {
      const T dot = gout.row(i).dot(output_.row(i));
      dx.row(i) = (gout.row(i) - dot * output_.row(i)) / norms_(i);
    }
    return dx;
  }

 private:
  EMat<T> output_;
  Eigen::Matrix<T, Eigen::Dynamic, 1> norms_;
};

}  // namespace respscl
