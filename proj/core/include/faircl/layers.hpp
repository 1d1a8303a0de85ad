#pragma once

#include <cstdint>
#include <vector>

#include "faircl/tensor.hpp"

// Forward/backward kernels for the layer set used by the model zoo.
// Spatial tensors are NHWC; convolution weights are [k, k, in, out].
namespace faircl::kernels {

// Stride 1, zero "same" padding, odd kernel size.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, bool has_bias);

// x [B, in] * weight [in, out] + bias [out]
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor* bias);

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, bool has_bias);

Tensor relu_forward(const Tensor& x);
// `output` is the forward result; gradient passes where output > 0.
Tensor relu_backward(const Tensor& output, const Tensor& grad_out);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};
// Non-overlapping window, trailing rows/cols that do not fill a window are dropped.
MaxPoolResult maxpool2d_forward(const Tensor& x, std::size_t window);
Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                          const Tensor& grad_out);

// Inverted dropout mask: entries are 0 or 1/(1-rate).
Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed);

// Normalization over every axis but the last (channels).
struct BatchNormForward {
  Tensor output;
  Tensor normalized;             // x_hat
  std::vector<double> mean;      // batch mean per channel
  std::vector<double> variance;  // biased batch variance per channel
  std::vector<double> inv_std;
};
BatchNormForward batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon);
Tensor batchnorm_eval_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              const Tensor& running_mean, const Tensor& running_var, double epsilon);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};
BatchNormGrads batchnorm_backward(const BatchNormForward& cache, const Tensor& gamma, const Tensor& grad_out);

}  // namespace faircl::kernels
