#include "sargen/nn/layers.hpp"

#include <cmath>

#include "sargen/errors.hpp"

namespace sargen::nn {

bool Tensor::all_finite() const {
    for (const double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace {

void he_init(Param& p, std::size_t fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : p.w) w = rng.normal() * std_dev;
}

}  // namespace

Conv2d::Conv2d(int in_c, int out_c, int kernel, int stride_, Rng& rng)
    : in_ch(in_c), out_ch(out_c), k(kernel), stride(stride_), pad(kernel / 2),
      W(static_cast<std::size_t>(out_c) * in_c * kernel * kernel), b(out_c) {
    he_init(W, static_cast<std::size_t>(in_c) * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
    Tensor y = forward_nobias(x);
    for (int n = 0; n < y.n; ++n)
        for (int oc = 0; oc < out_ch; ++oc) {
            double* yp = y.plane(n, oc);
            const double bias = b.w[oc];
            for (int i = 0; i < y.h * y.w; ++i) yp[i] += bias;
        }
    return y;
}

Tensor Conv2d::forward_nobias(const Tensor& x) const {
    const int oh = out_size(x.h), ow = out_size(x.w);
    Tensor y(x.n, out_ch, oh, ow);
    for (int n = 0; n < x.n; ++n) {
        for (int oc = 0; oc < out_ch; ++oc) {
            double* yp = y.plane(n, oc);
            for (int ic = 0; ic < in_ch; ++ic) {
                const double* xp = x.plane(n, ic);
                const double* wp = &W.w[(static_cast<std::size_t>(oc) * in_ch + ic) * k * k];
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double w = wp[ky * k + kx];
                        if (w == 0.0) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= x.h) continue;
                            const double* xrow = xp + static_cast<std::size_t>(iy) * x.w;
                            double* yrow = yp + static_cast<std::size_t>(oy) * ow;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= x.w) continue;
                                yrow[ox] += w * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor Conv2d::backward_input(const Tensor& gy, int in_h, int in_w) const {
    Tensor gx(gy.n, in_ch, in_h, in_w);
    for (int n = 0; n < gy.n; ++n) {
        for (int oc = 0; oc < out_ch; ++oc) {
            const double* gp = gy.plane(n, oc);
            for (int ic = 0; ic < in_ch; ++ic) {
                double* xp = gx.plane(n, ic);
                const double* wp = &W.w[(static_cast<std::size_t>(oc) * in_ch + ic) * k * k];
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double w = wp[ky * k + kx];
                        if (w == 0.0) continue;
                        for (int oy = 0; oy < gy.h; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= in_h) continue;
                            const double* grow = gp + static_cast<std::size_t>(oy) * gy.w;
                            double* xrow = xp + static_cast<std::size_t>(iy) * in_w;
                            for (int ox = 0; ox < gy.w; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= in_w) continue;
                                xrow[ix] += w * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void Conv2d::grad_params(const Tensor& x, const Tensor& gy, bool with_bias) {
    for (int n = 0; n < x.n; ++n) {
        for (int oc = 0; oc < out_ch; ++oc) {
            const double* gp = gy.plane(n, oc);
            if (with_bias) {
                double s = 0.0;
                for (int i = 0; i < gy.h * gy.w; ++i) s += gp[i];
                b.g[oc] += s;
            }
            for (int ic = 0; ic < in_ch; ++ic) {
                const double* xp = x.plane(n, ic);
                double* wg = &W.g[(static_cast<std::size_t>(oc) * in_ch + ic) * k * k];
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        double s = 0.0;
                        for (int oy = 0; oy < gy.h; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= x.h) continue;
                            const double* grow = gp + static_cast<std::size_t>(oy) * gy.w;
                            const double* xrow = xp + static_cast<std::size_t>(iy) * x.w;
                            for (int ox = 0; ox < gy.w; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= x.w) continue;
                                s += grow[ox] * xrow[ix];
                            }
                        }
                        wg[ky * k + kx] += s;
                    }
                }
            }
        }
    }
}

Dense::Dense(int in_d, int out_d, Rng& rng)
    : in_dim(in_d), out_dim(out_d), W(static_cast<std::size_t>(in_d) * out_d), b(out_d) {
    he_init(W, in_d, rng);
}

Tensor Dense::forward(const Tensor& x) const {
    Tensor y = forward_nobias(x);
    for (int n = 0; n < x.n; ++n)
        for (int o = 0; o < out_dim; ++o) y.v[static_cast<std::size_t>(n) * out_dim + o] += b.w[o];
    return y;
}

Tensor Dense::forward_nobias(const Tensor& x) const {
    Tensor y(x.n, out_dim, 1, 1);
    for (int n = 0; n < x.n; ++n) {
        const double* xp = &x.v[static_cast<std::size_t>(n) * in_dim];
        double* yp = &y.v[static_cast<std::size_t>(n) * out_dim];
        for (int o = 0; o < out_dim; ++o) {
            const double* wp = &W.w[static_cast<std::size_t>(o) * in_dim];
            double s = 0.0;
            for (int i = 0; i < in_dim; ++i) s += wp[i] * xp[i];
            yp[o] = s;
        }
    }
    return y;
}

Tensor Dense::backward_input(const Tensor& gy) const {
    Tensor gx(gy.n, in_dim, 1, 1);
    for (int n = 0; n < gy.n; ++n) {
        const double* gp = &gy.v[static_cast<std::size_t>(n) * out_dim];
        double* xp = &gx.v[static_cast<std::size_t>(n) * in_dim];
        for (int o = 0; o < out_dim; ++o) {
            const double* wp = &W.w[static_cast<std::size_t>(o) * in_dim];
            const double g = gp[o];
            if (g == 0.0) continue;
            for (int i = 0; i < in_dim; ++i) xp[i] += wp[i] * g;
        }
    }
    return gx;
}

void Dense::grad_params(const Tensor& x, const Tensor& gy, bool with_bias) {
    for (int n = 0; n < x.n; ++n) {
        const double* xp = &x.v[static_cast<std::size_t>(n) * in_dim];
        const double* gp = &gy.v[static_cast<std::size_t>(n) * out_dim];
        for (int o = 0; o < out_dim; ++o) {
            const double g = gp[o];
            if (with_bias) b.g[o] += g;
            if (g == 0.0) continue;
            double* wg = &W.g[static_cast<std::size_t>(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) wg[i] += g * xp[i];
        }
    }
}

BatchNorm2d::BatchNorm2d(int ch)
    : channels(ch), gamma(ch), beta(ch), running_mean(ch, 0.0), running_var(ch, 1.0) {
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
}

Tensor BatchNorm2d::forward_train(const Tensor& x, Cache& cache) {
    const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
    Tensor y = Tensor::like(x);
    cache.xhat = Tensor::like(x);
    cache.inv_std.assign(channels, 0.0);
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (int n = 0; n < x.n; ++n) {
            const double* xp = x.plane(n, c);
            for (int i = 0; i < x.h * x.w; ++i) mean += xp[i];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int n = 0; n < x.n; ++n) {
            const double* xp = x.plane(n, c);
            for (int i = 0; i < x.h * x.w; ++i) {
                const double d = xp[i] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps);
        cache.inv_std[c] = inv;
        running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
        running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        for (int n = 0; n < x.n; ++n) {
            const double* xp = x.plane(n, c);
            double* hp = cache.xhat.plane(n, c);
            double* yp = y.plane(n, c);
            for (int i = 0; i < x.h * x.w; ++i) {
                hp[i] = (xp[i] - mean) * inv;
                yp[i] = gamma.w[c] * hp[i] + beta.w[c];
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::forward_eval(const Tensor& x) const {
    Tensor y = Tensor::like(x);
    for (int c = 0; c < channels; ++c) {
        const double inv = 1.0 / std::sqrt(running_var[c] + eps);
        const double g = gamma.w[c], bb = beta.w[c], mu = running_mean[c];
        for (int n = 0; n < x.n; ++n) {
            const double* xp = x.plane(n, c);
            double* yp = y.plane(n, c);
            for (int i = 0; i < x.h * x.w; ++i) yp[i] = g * (xp[i] - mu) * inv + bb;
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Cache& cache, const Tensor& gy) {
    const auto& xhat = cache.xhat;
    const std::size_t m = static_cast<std::size_t>(gy.n) * gy.h * gy.w;
    Tensor gx = Tensor::like(gy);
    for (int c = 0; c < channels; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int n = 0; n < gy.n; ++n) {
            const double* gp = gy.plane(n, c);
            const double* hp = xhat.plane(n, c);
            for (int i = 0; i < gy.h * gy.w; ++i) {
                sum_gy += gp[i];
                sum_gy_xhat += gp[i] * hp[i];
            }
        }
        gamma.g[c] += sum_gy_xhat;
        beta.g[c] += sum_gy;
        const double mean_gy = sum_gy / static_cast<double>(m);
        const double mean_gy_xhat = sum_gy_xhat / static_cast<double>(m);
        const double scale = gamma.w[c] * cache.inv_std[c];
        for (int n = 0; n < gy.n; ++n) {
            const double* gp = gy.plane(n, c);
            const double* hp = xhat.plane(n, c);
            double* xp = gx.plane(n, c);
            for (int i = 0; i < gy.h * gy.w; ++i)
                xp[i] = scale * (gp[i] - mean_gy - hp[i] * mean_gy_xhat);
        }
    }
    return gx;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor y = Tensor::like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] >= 0.0 ? x.v[i] : slope * x.v[i];
    return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& gy, double slope) {
    Tensor gx = Tensor::like(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        gx.v[i] = gy.v[i] * (x.v[i] >= 0.0 ? 1.0 : slope);
    return gx;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y = Tensor::like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
    Tensor gx = Tensor::like(y);
    for (std::size_t i = 0; i < y.size(); ++i) gx.v[i] = gy.v[i] * y.v[i] * (1.0 - y.v[i]);
    return gx;
}

Tensor tanh_act(const Tensor& x) {
    Tensor y = Tensor::like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
    return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& gy) {
    Tensor gx = Tensor::like(y);
    for (std::size_t i = 0; i < y.size(); ++i) gx.v[i] = gy.v[i] * (1.0 - y.v[i] * y.v[i]);
    return gx;
}

Tensor upsample2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            const double* xp = x.plane(n, c);
            double* yp = y.plane(n, c);
            for (int r = 0; r < x.h; ++r) {
                for (int cc = 0; cc < x.w; ++cc) {
                    const double v = xp[static_cast<std::size_t>(r) * x.w + cc];
                    const std::size_t base = static_cast<std::size_t>(2 * r) * y.w + 2 * cc;
                    yp[base] = v;
                    yp[base + 1] = v;
                    yp[base + y.w] = v;
                    yp[base + y.w + 1] = v;
                }
            }
        }
    }
    return y;
}

Tensor upsample2x_backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, gy.h / 2, gy.w / 2);
    for (int n = 0; n < gy.n; ++n) {
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* xp = gx.plane(n, c);
            for (int r = 0; r < gx.h; ++r) {
                for (int cc = 0; cc < gx.w; ++cc) {
                    const std::size_t base = static_cast<std::size_t>(2 * r) * gy.w + 2 * cc;
                    xp[static_cast<std::size_t>(r) * gx.w + cc] =
                        gp[base] + gp[base + 1] + gp[base + gy.w] + gp[base + gy.w + 1];
                }
            }
        }
    }
    return gx;
}

Tensor avgpool2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h / 2, x.w / 2);
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            const double* xp = x.plane(n, c);
            double* yp = y.plane(n, c);
            for (int r = 0; r < y.h; ++r) {
                for (int cc = 0; cc < y.w; ++cc) {
                    const std::size_t base = static_cast<std::size_t>(2 * r) * x.w + 2 * cc;
                    yp[static_cast<std::size_t>(r) * y.w + cc] =
                        0.25 * (xp[base] + xp[base + 1] + xp[base + x.w] + xp[base + x.w + 1]);
                }
            }
        }
    }
    return y;
}

Tensor avgpool2x_backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, gy.h * 2, gy.w * 2);
    for (int n = 0; n < gy.n; ++n) {
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* xp = gx.plane(n, c);
            for (int r = 0; r < gy.h; ++r) {
                for (int cc = 0; cc < gy.w; ++cc) {
                    const double v = 0.25 * gp[static_cast<std::size_t>(r) * gy.w + cc];
                    const std::size_t base = static_cast<std::size_t>(2 * r) * gx.w + 2 * cc;
                    xp[base] = v;
                    xp[base + 1] = v;
                    xp[base + gx.w] = v;
                    xp[base + gx.w + 1] = v;
                }
            }
        }
    }
    return gx;
}

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& param = *params_[p];
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double g = param.g[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            param.w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

}  // namespace sargen::nn
