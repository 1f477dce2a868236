#include "sargen/wae.hpp"

#include <algorithm>
#include <cmath>

#include "sargen/errors.hpp"

namespace sargen {

using nn::Tensor;

const char* to_string(MmdKernel k) { return k == MmdKernel::rbf ? "rbf" : "imq"; }

MmdKernel mmd_kernel_from_string(const std::string& s) {
    if (s == "rbf") return MmdKernel::rbf;
    if (s == "imq") return MmdKernel::imq;
    throw InputError("unknown MMD kernel: " + s);
}

void WaeConfig::validate() const {
    if (!is_power_of_two(resolution) || resolution < 2)
        throw ConfigError("wae: resolution must be a power of two >= 2");
    if (conv_layers < 3 || conv_layers > 6)
        throw ConfigError("wae: conv_layers must be in [3,6]");
    if (latent_dim < 1) throw ConfigError("wae: latent_dim must be >= 1");
    if (!(mmd_weight > 0.0)) throw ConfigError("wae: mmd_weight must be positive");
    if ((resolution >> conv_layers) < 1)
        throw ConfigError("wae: conv depth reduces spatial size below 1");
    for (const double s : kernel_scales)
        if (!(s > 0.0)) throw ConfigError("wae: kernel scales must be positive");
    if (epochs < 0 || batch_size < 1 || base_channels < 1 || max_channels < 1 || !(lr > 0.0))
        throw ConfigError("wae: bad training hyperparameters");
}

std::vector<double> WaeConfig::scales_or_default() const {
    if (!kernel_scales.empty()) return kernel_scales;
    const double d = static_cast<double>(latent_dim);
    return {d / 8.0, d / 4.0, d / 2.0, d, 2.0 * d};
}

namespace {

double kernel_eval(MmdKernel kernel, double d2, double scale) {
    if (kernel == MmdKernel::rbf) return std::exp(-d2 / (2.0 * scale));
    return scale / (scale + d2);  // inverse multi-quadratic with C = scale
}

double sq_dist(const LatentVector& a, const LatentVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Canonical argument order makes the summation sequence identical under
// swap, so mmd(x,y) == mmd(y,x) bit-exactly.
bool should_swap(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y) {
    if (x.size() != y.size()) return x.size() > y.size();
    return std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end());
}

void check_sets(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y) {
    if (x.empty() || y.empty()) throw InputError("mmd: sample sets must be nonempty");
    const std::size_t d = x[0].size();
    for (const auto& v : x)
        if (v.size() != d) throw InputError("mmd: dimension mismatch within x");
    for (const auto& v : y)
        if (v.size() != d) throw InputError("mmd: dimension mismatch between x and y");
}

}  // namespace

double mmd(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y,
           MmdKernel kernel, const std::vector<double>& scales, bool unbiased) {
    check_sets(x, y);
    if (scales.empty()) throw InputError("mmd: need at least one kernel scale");
    const auto* a = &x;
    const auto* b = &y;
    if (should_swap(x, y)) std::swap(a, b);
    const std::size_t n = a->size(), m = b->size();

    double total = 0.0;
    for (const double s : scales) {
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (unbiased && i == j) continue;
                saa += kernel_eval(kernel, sq_dist((*a)[i], (*a)[j]), s);
            }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (unbiased && i == j) continue;
                sbb += kernel_eval(kernel, sq_dist((*b)[i], (*b)[j]), s);
            }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                sab += kernel_eval(kernel, sq_dist((*a)[i], (*b)[j]), s);
        double v;
        if (unbiased) {
            if (n < 2 || m < 2) throw InputError("mmd: unbiased estimator needs >= 2 samples");
            v = saa / (static_cast<double>(n) * (n - 1)) +
                sbb / (static_cast<double>(m) * (m - 1)) -
                2.0 * (sab / (static_cast<double>(n) * m));
        } else {
            const double taa = saa / (static_cast<double>(n) * n);
            const double tbb = sbb / (static_cast<double>(m) * m);
            const double tab = sab / (static_cast<double>(n) * m);
            v = taa + tbb - 2.0 * tab;
            if (v < 0.0) v = 0.0;  // V-statistic is nonnegative; clip fp dust
        }
        total += v;
    }
    return total;
}

double mmd_with_grad(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y,
                     MmdKernel kernel, const std::vector<double>& scales,
                     std::vector<LatentVector>& gx) {
    check_sets(x, y);
    const std::size_t n = x.size(), m = y.size();
    const std::size_t dim = x[0].size();
    gx.assign(n, LatentVector(dim, 0.0));

    const double total = mmd(x, y, kernel, scales, false);
    for (const double s : scales) {
        // skip scales clipped to zero (their derivative is defined as zero)
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                saa += kernel_eval(kernel, sq_dist(x[i], x[j]), s);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                sbb += kernel_eval(kernel, sq_dist(y[i], y[j]), s);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                sab += kernel_eval(kernel, sq_dist(x[i], y[j]), s);
        const double v = saa / (static_cast<double>(n) * n) + sbb / (static_cast<double>(m) * m) -
                         2.0 * (sab / (static_cast<double>(n) * m));
        if (v < 0.0) continue;

        const double cxx = 2.0 / (static_cast<double>(n) * n);
        const double cxy = -2.0 / (static_cast<double>(n) * m);
        for (std::size_t i = 0; i < n; ++i) {
            auto& g = gx[i];
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double d2 = sq_dist(x[i], x[j]);
                const double k = kernel_eval(kernel, d2, s);
                const double f = kernel == MmdKernel::rbf ? -k / s : -2.0 * k / (s + d2);
                for (std::size_t c = 0; c < dim; ++c) g[c] += cxx * f * (x[i][c] - x[j][c]);
            }
            for (std::size_t j = 0; j < m; ++j) {
                const double d2 = sq_dist(x[i], y[j]);
                const double k = kernel_eval(kernel, d2, s);
                const double f = kernel == MmdKernel::rbf ? -k / s : -2.0 * k / (s + d2);
                for (std::size_t c = 0; c < dim; ++c) g[c] += cxy * f * (x[i][c] - y[j][c]);
            }
        }
    }
    return total;
}

WaeLossTerms wae_loss_terms(const Tensor& batch01, const Tensor& recon01,
                            const std::vector<LatentVector>& latents,
                            const std::vector<LatentVector>& prior, double lambda,
                            MmdKernel kernel, const std::vector<double>& scales) {
    if (batch01.size() == 0) throw InputError("wae_loss: empty batch");
    if (!batch01.same_shape(recon01)) throw InputError("wae_loss: recon shape mismatch");
    double recon = 0.0;
    for (std::size_t i = 0; i < batch01.size(); ++i) {
        const double d = recon01.v[i] - batch01.v[i];
        recon += d * d;
    }
    recon /= static_cast<double>(batch01.size());
    WaeLossTerms t;
    t.recon = recon;
    t.mmd = mmd(latents, prior, kernel, scales, false);
    t.total = t.recon + lambda * t.mmd;
    return t;
}

namespace {

Tensor reshape(const Tensor& t, int n, int c, int h, int w) {
    Tensor out(n, c, h, w);
    out.v = t.v;
    return out;
}

std::vector<LatentVector> rows_of(const Tensor& t) {
    const int d = t.c * t.h * t.w;
    std::vector<LatentVector> rows(t.n, LatentVector(d));
    for (int n = 0; n < t.n; ++n)
        std::copy_n(t.v.begin() + static_cast<std::size_t>(n) * d, d, rows[n].begin());
    return rows;
}

}  // namespace

struct WaeModel::Cache {
    std::vector<Tensor> enc_conv_in;
    std::vector<nn::BatchNorm2d::Cache> enc_bn;
    std::vector<Tensor> enc_bn_out;
    Tensor enc_head_in;
    Tensor dec_head_in;
    std::vector<Tensor> dec_conv_in;
    std::vector<nn::BatchNorm2d::Cache> dec_bn;
    std::vector<Tensor> dec_bn_out;
    Tensor dec_out_in;
    Tensor recon01;
    Tensor latents;
};

WaeModel::WaeModel(const WaeConfig& config, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    Rng rng(sub_seed(seed, 0x3AE));
    const int L = cfg_.conv_layers;
    channels_.resize(L);
    for (int i = 0; i < L; ++i) channels_[i] = std::min(cfg_.base_channels << i, cfg_.max_channels);

    for (int i = 0; i < L; ++i)
        enc_convs_.emplace_back(i == 0 ? 1 : channels_[i - 1], channels_[i], 3, 2, rng);
    for (int i = 0; i < L; ++i) enc_bns_.emplace_back(channels_[i]);

    const int s_deep = cfg_.resolution >> L;
    const int feat = channels_[L - 1] * s_deep * s_deep;
    enc_head_ = nn::Dense(feat, cfg_.latent_dim, rng);
    dec_head_ = nn::Dense(cfg_.latent_dim, feat, rng);
    for (int j = 0; j < L; ++j) {
        const int in_c = channels_[L - 1 - j];
        const int out_c = channels_[std::max(L - 2 - j, 0)];
        dec_convs_.emplace_back(in_c, out_c, 3, 1, rng);
        dec_bns_.emplace_back(out_c);
    }
    dec_out_ = nn::Conv2d(channels_[0], 1, 3, 1, rng);
}

std::size_t WaeModel::param_count() const {
    std::size_t total = 0;
    for (const auto* p : const_cast<WaeModel*>(this)->params()) total += p->size();
    return total;
}

std::vector<int> WaeModel::encoder_spatial_sizes() const {
    std::vector<int> sizes;
    int s = cfg_.resolution;
    for (int i = 0; i < cfg_.conv_layers; ++i) {
        s /= 2;
        sizes.push_back(s);
    }
    return sizes;
}

std::vector<nn::Param*> WaeModel::params() {
    std::vector<nn::Param*> ps;
    for (auto& c : enc_convs_) {
        ps.push_back(&c.W);
        ps.push_back(&c.b);
    }
    for (auto& bn : enc_bns_) {
        ps.push_back(&bn.gamma);
        ps.push_back(&bn.beta);
    }
    ps.push_back(&enc_head_.W);
    ps.push_back(&enc_head_.b);
    ps.push_back(&dec_head_.W);
    ps.push_back(&dec_head_.b);
    for (auto& c : dec_convs_) {
        ps.push_back(&c.W);
        ps.push_back(&c.b);
    }
    for (auto& bn : dec_bns_) {
        ps.push_back(&bn.gamma);
        ps.push_back(&bn.beta);
    }
    ps.push_back(&dec_out_.W);
    ps.push_back(&dec_out_.b);
    return ps;
}

std::vector<std::pair<std::string, std::vector<double>*>> WaeModel::named_state() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    auto add = [&out](const std::string& name, std::vector<double>* v) {
        out.emplace_back(name, v);
    };
    for (std::size_t i = 0; i < enc_convs_.size(); ++i) {
        add("enc.conv" + std::to_string(i) + ".W", &enc_convs_[i].W.w);
        add("enc.conv" + std::to_string(i) + ".b", &enc_convs_[i].b.w);
        add("enc.bn" + std::to_string(i) + ".gamma", &enc_bns_[i].gamma.w);
        add("enc.bn" + std::to_string(i) + ".beta", &enc_bns_[i].beta.w);
        add("enc.bn" + std::to_string(i) + ".mean", &enc_bns_[i].running_mean);
        add("enc.bn" + std::to_string(i) + ".var", &enc_bns_[i].running_var);
    }
    add("enc.head.W", &enc_head_.W.w);
    add("enc.head.b", &enc_head_.b.w);
    add("dec.head.W", &dec_head_.W.w);
    add("dec.head.b", &dec_head_.b.w);
    for (std::size_t j = 0; j < dec_convs_.size(); ++j) {
        add("dec.conv" + std::to_string(j) + ".W", &dec_convs_[j].W.w);
        add("dec.conv" + std::to_string(j) + ".b", &dec_convs_[j].b.w);
        add("dec.bn" + std::to_string(j) + ".gamma", &dec_bns_[j].gamma.w);
        add("dec.bn" + std::to_string(j) + ".beta", &dec_bns_[j].beta.w);
        add("dec.bn" + std::to_string(j) + ".mean", &dec_bns_[j].running_mean);
        add("dec.bn" + std::to_string(j) + ".var", &dec_bns_[j].running_var);
    }
    add("dec.out.W", &dec_out_.W.w);
    add("dec.out.b", &dec_out_.b.w);
    return out;
}

Tensor WaeModel::encode_train(const Tensor& x, Cache& cache) {
    const int L = cfg_.conv_layers;
    cache.enc_conv_in.clear();
    cache.enc_bn.resize(L);
    cache.enc_bn_out.clear();
    Tensor h = x;
    for (int i = 0; i < L; ++i) {
        cache.enc_conv_in.push_back(h);
        h = enc_convs_[i].forward(h);
        h = enc_bns_[i].forward_train(h, cache.enc_bn[i]);
        cache.enc_bn_out.push_back(h);
        h = nn::leaky_relu(h);
    }
    cache.enc_head_in = reshape(h, h.n, h.c * h.h * h.w, 1, 1);
    cache.latents = enc_head_.forward(cache.enc_head_in);
    return cache.latents;
}

Tensor WaeModel::decode_train(const Tensor& z, Cache& cache) {
    const int L = cfg_.conv_layers;
    const int s_deep = cfg_.resolution >> L;
    cache.dec_head_in = z;
    Tensor h = dec_head_.forward(z);
    h = reshape(h, z.n, channels_[L - 1], s_deep, s_deep);
    cache.dec_conv_in.clear();
    cache.dec_bn.resize(L);
    cache.dec_bn_out.clear();
    for (int j = 0; j < L; ++j) {
        h = nn::upsample2x(h);
        cache.dec_conv_in.push_back(h);
        h = dec_convs_[j].forward(h);
        h = dec_bns_[j].forward_train(h, cache.dec_bn[j]);
        cache.dec_bn_out.push_back(h);
        h = nn::leaky_relu(h);
    }
    cache.dec_out_in = h;
    h = dec_out_.forward(h);
    cache.recon01 = nn::sigmoid(h);
    return cache.recon01;
}

void WaeModel::backward(const Cache& cache, const Tensor& gy_recon, const Tensor& gz_extra) {
    const int L = cfg_.conv_layers;
    Tensor g = nn::sigmoid_backward(cache.recon01, gy_recon);
    dec_out_.grad_params(cache.dec_out_in, g);
    g = dec_out_.backward_input(g, cache.dec_out_in.h, cache.dec_out_in.w);
    for (int j = L - 1; j >= 0; --j) {
        g = nn::leaky_relu_backward(cache.dec_bn_out[j], g);
        g = dec_bns_[j].backward(cache.dec_bn[j], g);
        dec_convs_[j].grad_params(cache.dec_conv_in[j], g);
        g = dec_convs_[j].backward_input(g, cache.dec_conv_in[j].h, cache.dec_conv_in[j].w);
        g = nn::upsample2x_backward(g);
    }
    g = reshape(g, g.n, g.c * g.h * g.w, 1, 1);
    dec_head_.grad_params(cache.dec_head_in, g);
    Tensor gz = dec_head_.backward_input(g);
    for (std::size_t i = 0; i < gz.size(); ++i) gz.v[i] += gz_extra.v[i];

    enc_head_.grad_params(cache.enc_head_in, gz);
    g = enc_head_.backward_input(gz);
    const auto sizes = encoder_spatial_sizes();
    g = reshape(g, g.n, channels_[L - 1], sizes[L - 1], sizes[L - 1]);
    for (int i = L - 1; i >= 0; --i) {
        g = nn::leaky_relu_backward(cache.enc_bn_out[i], g);
        g = enc_bns_[i].backward(cache.enc_bn[i], g);
        enc_convs_[i].grad_params(cache.enc_conv_in[i], g);
        g = enc_convs_[i].backward_input(g, cache.enc_conv_in[i].h, cache.enc_conv_in[i].w);
    }
}

WaeLossTerms WaeModel::loss(const Tensor& batch01, const std::vector<LatentVector>& prior,
                            double lambda) {
    if (batch01.n == 0) throw InputError("wae_loss: empty batch");
    if (batch01.h != cfg_.resolution || batch01.w != cfg_.resolution)
        throw InputError("wae_loss: batch resolution mismatch");
    Cache cache;
    const Tensor z = encode_train(batch01, cache);
    decode_train(z, cache);
    return wae_loss_terms(batch01, cache.recon01, rows_of(z), prior, lambda, cfg_.kernel,
                          cfg_.scales_or_default());
}

WaeLossTerms WaeModel::loss_backward(const Tensor& batch01,
                                     const std::vector<LatentVector>& prior, double lambda) {
    if (batch01.n == 0) throw InputError("wae_loss: empty batch");
    Cache cache;
    const Tensor z = encode_train(batch01, cache);
    decode_train(z, cache);
    const auto latents = rows_of(z);

    WaeLossTerms terms;
    double recon = 0.0;
    Tensor gy = Tensor::like(batch01);
    const double scale = 2.0 / static_cast<double>(batch01.size());
    for (std::size_t i = 0; i < batch01.size(); ++i) {
        const double d = cache.recon01.v[i] - batch01.v[i];
        recon += d * d;
        gy.v[i] = scale * d;
    }
    terms.recon = recon / static_cast<double>(batch01.size());

    std::vector<LatentVector> gmmd;
    terms.mmd = mmd_with_grad(latents, prior, cfg_.kernel, cfg_.scales_or_default(), gmmd);
    terms.total = terms.recon + lambda * terms.mmd;

    Tensor gz_extra(z.n, z.c, 1, 1);
    for (int n = 0; n < z.n; ++n)
        for (int c = 0; c < z.c; ++c)
            gz_extra.v[static_cast<std::size_t>(n) * z.c + c] = lambda * gmmd[n][c];
    backward(cache, gy, gz_extra);
    return terms;
}

nn::Tensor WaeModel::encode_batch(const Tensor& batch01) const {
    const int L = cfg_.conv_layers;
    Tensor h = batch01;
    for (int i = 0; i < L; ++i) {
        h = enc_convs_[i].forward(h);
        h = enc_bns_[i].forward_eval(h);
        h = nn::leaky_relu(h);
    }
    h = reshape(h, h.n, h.c * h.h * h.w, 1, 1);
    return enc_head_.forward(h);
}

LatentVector WaeModel::encode(const Tile& tile) const {
    if (tile.size != cfg_.resolution)
        throw InputError("encode: tile resolution " + std::to_string(tile.size) +
                         " does not match model resolution " + std::to_string(cfg_.resolution));
    Tensor x(1, 1, tile.size, tile.size);
    for (std::size_t i = 0; i < tile.px.size(); ++i) x.v[i] = tile.px[i] / 255.0;
    const Tensor z = encode_batch(x);
    return LatentVector(z.v.begin(), z.v.end());
}

Tile WaeModel::decode(const LatentVector& z) const {
    if (static_cast<int>(z.size()) != cfg_.latent_dim)
        throw InputError("decode: latent length mismatch");
    const int L = cfg_.conv_layers;
    const int s_deep = cfg_.resolution >> L;
    Tensor zt(1, cfg_.latent_dim, 1, 1);
    zt.v.assign(z.begin(), z.end());
    Tensor h = dec_head_.forward(zt);
    h = reshape(h, 1, channels_[L - 1], s_deep, s_deep);
    for (int j = 0; j < L; ++j) {
        h = nn::upsample2x(h);
        h = dec_convs_[j].forward(h);
        h = dec_bns_[j].forward_eval(h);
        h = nn::leaky_relu(h);
    }
    h = dec_out_.forward(h);
    h = nn::sigmoid(h);
    Tile out;
    out.size = cfg_.resolution;
    out.px.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        out.px[i] = static_cast<std::uint8_t>(std::floor(h.v[i] * 255.0 + 0.5));
    return out;
}

WaeModel build_wae(const WaeConfig& config, std::uint64_t seed) {
    return WaeModel(config, seed);
}

WaeModel train_wae(const std::vector<Tile>& tiles, const WaeConfig& config, std::uint64_t seed) {
    config.validate();
    for (const auto& t : tiles)
        if (t.size != config.resolution)
            throw InputError("train_wae: dataset tile at resolution " + std::to_string(t.size) +
                             ", expected " + std::to_string(config.resolution));
    if (tiles.empty() && config.epochs > 0) throw InputError("train_wae: empty dataset");

    WaeModel model(config, seed);
    if (config.epochs == 0) return model;

    Rng order_rng(sub_seed(seed, 1));
    Rng prior_rng(sub_seed(seed, 2));
    nn::Adam adam(model.params(), config.lr);

    const std::size_t n = tiles.size();
    const std::size_t bs = std::min<std::size_t>(config.batch_size, n);
    const std::size_t n_batches = std::max<std::size_t>(1, n / bs);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        EpochStats stats;
        stats.epoch = epoch;
        for (std::size_t b = 0; b < n_batches; ++b) {
            Tensor batch(static_cast<int>(bs), 1, config.resolution, config.resolution);
            for (std::size_t k = 0; k < bs; ++k) {
                const auto& t = tiles[order[b * bs + k]];
                double* dst = batch.plane(static_cast<int>(k), 0);
                for (std::size_t i = 0; i < t.px.size(); ++i) dst[i] = t.px[i] / 255.0;
            }
            std::vector<LatentVector> prior(bs, LatentVector(config.latent_dim));
            for (auto& p : prior)
                for (auto& v : p) v = prior_rng.normal();

            adam.zero_grad();
            const auto terms = model.loss_backward(batch, prior, config.mmd_weight);
            adam.step();
            stats.total += terms.total;
            stats.recon += terms.recon;
            stats.mmd += terms.mmd;
        }
        stats.total /= static_cast<double>(n_batches);
        stats.recon /= static_cast<double>(n_batches);
        stats.mmd /= static_cast<double>(n_batches);
        model.history().push_back(stats);
    }
    return model;
}

}  // namespace sargen
