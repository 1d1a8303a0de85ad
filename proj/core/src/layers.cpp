#include "faircl/layers.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "faircl/error.hpp"

namespace faircl::kernels {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw InputError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const std::size_t batch = x.dim(0), height = x.dim(1), width = x.dim(2), in_ch = x.dim(3);
  const std::size_t k = weight.dim(0), out_ch = weight.dim(3);
  if (weight.dim(1) != k || weight.dim(2) != in_ch || k % 2 == 0) {
    throw InputError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  const long pad = static_cast<long>(k / 2);
  Tensor y({batch, height, width, out_ch});
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  double* yd = y.data().data();

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < height; ++oy) {
      for (std::size_t ox = 0; ox < width; ++ox) {
        double* out = yd + ((b * height + oy) * width + ox) * out_ch;
        if (bias != nullptr) {
          for (std::size_t co = 0; co < out_ch; ++co) out[co] = (*bias)[co];
        }
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(width)) continue;
            const double* in = xd + ((b * height + iy) * width + ix) * in_ch;
            const double* wrow = wd + (ky * k + kx) * in_ch * out_ch;
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
              const double xv = in[ci];
              const double* wp = wrow + ci * out_ch;
              for (std::size_t co = 0; co < out_ch; ++co) out[co] += xv * wp[co];
            }
          }
        }
      }
    }
  }
  return y;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, bool has_bias) {
  const std::size_t batch = x.dim(0), height = x.dim(1), width = x.dim(2), in_ch = x.dim(3);
  const std::size_t k = weight.dim(0), out_ch = weight.dim(3);
  const long pad = static_cast<long>(k / 2);
  Conv2dGrads g{Tensor(x.shape()), Tensor(weight.shape()), has_bias ? Tensor({out_ch}) : Tensor()};
  const double* xd = x.data().data();
  const double* wd = weight.data().data();
  const double* gd = grad_out.data().data();
  double* dx = g.input.data().data();
  double* dw = g.weight.data().data();

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < height; ++oy) {
      for (std::size_t ox = 0; ox < width; ++ox) {
        const double* go = gd + ((b * height + oy) * width + ox) * out_ch;
        if (has_bias) {
          for (std::size_t co = 0; co < out_ch; ++co) g.bias[co] += go[co];
        }
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(width)) continue;
            const std::size_t in_off = ((b * height + iy) * width + ix) * in_ch;
            const double* in = xd + in_off;
            double* din = dx + in_off;
            const std::size_t w_off = (ky * k + kx) * in_ch * out_ch;
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
              const double xv = in[ci];
              const double* wp = wd + w_off + ci * out_ch;
              double* dwp = dw + w_off + ci * out_ch;
              double acc = 0.0;
              for (std::size_t co = 0; co < out_ch; ++co) {
                dwp[co] += xv * go[co];
                acc += wp[co] * go[co];
              }
              din[ci] += acc;
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  require_rank(x, 2, "dense input");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in) {
    throw InputError("dense: weight " + shape_string(weight.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = &y(b, 0);
    if (bias != nullptr) {
      for (std::size_t o = 0; o < out; ++o) row[o] = (*bias)[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x(b, i);
      const double* wp = &weight(i, 0);
      for (std::size_t o = 0; o < out; ++o) row[o] += xv * wp[o];
    }
  }
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, bool has_bias) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
  DenseGrads g{Tensor(x.shape()), Tensor(weight.shape()), has_bias ? Tensor({out}) : Tensor()};
  for (std::size_t b = 0; b < batch; ++b) {
    const double* go = &grad_out(b, 0);
    if (has_bias) {
      for (std::size_t o = 0; o < out; ++o) g.bias[o] += go[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x(b, i);
      const double* wp = &weight(i, 0);
      double* dwp = &g.weight(i, 0);
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        dwp[o] += xv * go[o];
        acc += wp[o] * go[o];
      }
      g.input(b, i) = acc;
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
  Tensor g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = output[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

MaxPoolResult maxpool2d_forward(const Tensor& x, std::size_t window) {
  require_rank(x, 4, "maxpool input");
  const std::size_t batch = x.dim(0), height = x.dim(1), width = x.dim(2), ch = x.dim(3);
  const std::size_t oh = height / window, ow = width / window;
  if (oh == 0 || ow == 0) {
    throw InputError("maxpool: input " + shape_string(x.shape()) + " smaller than window " +
                     std::to_string(window));
  }
  MaxPoolResult r{Tensor({batch, oh, ow, ch}), std::vector<std::size_t>(batch * oh * ow * ch)};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t c = 0; c < ch; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              const std::size_t idx = ((b * height + oy * window + dy) * width + ox * window + dx) * ch + c;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t out_idx = ((b * oh + oy) * ow + ox) * ch + c;
          r.output[out_idx] = best;
          r.argmax[out_idx] = best_idx;
        }
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                          const Tensor& grad_out) {
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  Tensor mask(shape, 1.0);
  if (rate <= 0.0) return mask;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale : 0.0;
  return mask;
}

BatchNormForward batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  const std::size_t ch = x.shape().back();
  if (gamma.size() != ch || beta.size() != ch) {
    throw InputError("batchnorm: " + std::to_string(gamma.size()) + " channels configured, input has " +
                     std::to_string(ch));
  }
  const std::size_t rows = x.size() / ch;
  BatchNormForward f{Tensor(x.shape()), Tensor(x.shape()), std::vector<double>(ch, 0.0),
                     std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) f.mean[c] += x[r * ch + c];
  }
  for (double& m : f.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double d = x[r * ch + c] - f.mean[c];
      f.variance[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < ch; ++c) {
    f.variance[c] /= static_cast<double>(rows);
    f.inv_std[c] = 1.0 / std::sqrt(f.variance[c] + epsilon);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t i = r * ch + c;
      f.normalized[i] = (x[i] - f.mean[c]) * f.inv_std[c];
      f.output[i] = gamma[c] * f.normalized[i] + beta[c];
    }
  }
  return f;
}

Tensor batchnorm_eval_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              const Tensor& running_mean, const Tensor& running_var, double epsilon) {
  const std::size_t ch = x.shape().back();
  if (gamma.size() != ch) {
    throw InputError("batchnorm: " + std::to_string(gamma.size()) + " channels configured, input has " +
                     std::to_string(ch));
  }
  Tensor y(x.shape());
  std::vector<double> scale(ch);
  for (std::size_t c = 0; c < ch; ++c) scale[c] = gamma[c] / std::sqrt(running_var[c] + epsilon);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = i % ch;
    y[i] = (x[i] - running_mean[c]) * scale[c] + beta[c];
  }
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNormForward& cache, const Tensor& gamma, const Tensor& grad_out) {
  const std::size_t ch = gamma.size();
  const std::size_t rows = grad_out.size() / ch;
  BatchNormGrads g{Tensor(grad_out.shape()), Tensor({ch}), Tensor({ch})};
  std::vector<double> sum_dxhat(ch, 0.0), sum_dxhat_xhat(ch, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t i = r * ch + c;
      g.beta[c] += grad_out[i];
      g.gamma[c] += grad_out[i] * cache.normalized[i];
      const double dxhat = grad_out[i] * gamma[c];
      sum_dxhat[c] += dxhat;
      sum_dxhat_xhat[c] += dxhat * cache.normalized[i];
    }
  }
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t i = r * ch + c;
      const double dxhat = grad_out[i] * gamma[c];
      g.input[i] = cache.inv_std[c] / m * (m * dxhat - sum_dxhat[c] - cache.normalized[i] * sum_dxhat_xhat[c]);
    }
  }
  return g;
}

}  // namespace faircl::kernels
