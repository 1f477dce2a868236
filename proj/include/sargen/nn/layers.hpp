#pragma once

#include <vector>

#include "sargen/nn/tensor.hpp"
#include "sargen/rng.hpp"

namespace sargen::nn {

/// 2-D convolution, square kernel, zero padding k/2 ("same" for stride 1,
/// exact halving for stride 2 on even inputs).
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
    Param W;  // out_ch * in_ch * k * k
    Param b;  // out_ch

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int kernel, int stride_, Rng& rng);

    int out_size(int in) const { return (in + 2 * pad - k) / stride + 1; }

    Tensor forward(const Tensor& x) const;
    /// Forward without bias: the weight-linear map alone. Used by the
    /// gradient-penalty double pass.
    Tensor forward_nobias(const Tensor& x) const;
    Tensor backward_input(const Tensor& gy, int in_h, int in_w) const;
    /// Accumulates dL/dW (and dL/db when with_bias) for a recorded
    /// input/cotangent pair.
    void grad_params(const Tensor& x, const Tensor& gy, bool with_bias = true);
};

/// Fully connected layer over flattened samples.
struct Dense {
    int in_dim = 0, out_dim = 0;
    Param W;  // out*in
    Param b;  // out

    Dense() = default;
    Dense(int in_d, int out_d, Rng& rng);

    Tensor forward(const Tensor& x) const;  // x: (n, in_dim, 1, 1)
    Tensor forward_nobias(const Tensor& x) const;
    Tensor backward_input(const Tensor& gy) const;
    void grad_params(const Tensor& x, const Tensor& gy, bool with_bias = true);
};

/// Per-channel batch normalization (population statistics over N*H*W).
struct BatchNorm2d {
    int channels = 0;
    double eps = 1e-5;
    double momentum = 0.1;
    Param gamma, beta;
    std::vector<double> running_mean, running_var;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int ch);

    struct Cache {
        Tensor xhat;
        std::vector<double> inv_std;
    };

    Tensor forward_train(const Tensor& x, Cache& cache);
    Tensor forward_eval(const Tensor& x) const;
    Tensor backward(const Cache& cache, const Tensor& gy);
};

// Elementwise activations. Backward takes the cached forward *input* for
// leaky_relu and the cached *output* for sigmoid/tanh.
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& gy, double slope = 0.2);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& gy);
Tensor tanh_act(const Tensor& x);
Tensor tanh_backward(const Tensor& y, const Tensor& gy);

// Nearest-neighbor 2x upsample and 2x2 mean pooling, with adjoints.
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& gy);
Tensor avgpool2x(const Tensor& x);
Tensor avgpool2x_backward(const Tensor& gy);

/// Adam with bias-corrected moments; state is positional over the parameter
/// list it was created for.
class Adam {
  public:
    Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    void zero_grad();
    double lr() const { return lr_; }

  private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace sargen::nn
