#pragma once

#include <cstddef>
#include <vector>

namespace sargen::nn {

/// Dense NCHW tensor of doubles. Small and explicit; all layer math in this
/// project runs through plain loops over it.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

    static Tensor like(const Tensor& other) { return Tensor(other.n, other.c, other.h, other.w); }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    double& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    double* plane(int in, int ic) {
        return v.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }
    const double* plane(int in, int ic) const {
        return v.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }

    bool all_finite() const;
};

/// Parameter vector with its gradient accumulator.
struct Param {
    std::vector<double> w;
    std::vector<double> g;

    explicit Param(std::size_t size = 0) : w(size, 0.0), g(size, 0.0) {}
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
    std::size_t size() const { return w.size(); }
};

}  // namespace sargen::nn
