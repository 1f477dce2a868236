#include "sargen/gan.hpp"

#include <algorithm>
#include <cmath>

#include "sargen/errors.hpp"

namespace sargen {

using nn::Tensor;

const char* to_string(AdvLoss l) { return l == AdvLoss::wgan_gp ? "wgan-gp" : "nonsaturating"; }

AdvLoss adv_loss_from_string(const std::string& s) {
    if (s == "wgan-gp") return AdvLoss::wgan_gp;
    if (s == "nonsaturating") return AdvLoss::nonsaturating;
    throw InputError("unknown adversarial loss: " + s);
}

void ProgressiveSchedule::validate(int seed_size) const {
    if (steps.empty()) throw ConfigError("gan: schedule must have at least one step");
    if (!is_power_of_two(steps[0].resolution) || steps[0].resolution < 2 * seed_size)
        throw ConfigError("gan: start resolution must be a power of two >= twice the seed size");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].batch_size < 1 || steps[i].images_to_show < 1)
            throw ConfigError("gan: schedule step needs batch_size >= 1 and images >= 1");
        if (i > 0 && steps[i].resolution != 2 * steps[i - 1].resolution)
            throw ConfigError("gan: schedule resolutions must double at every step");
    }
}

void GanConfig::validate() const {
    if (!is_power_of_two(seed_size) || seed_size < 2)
        throw ConfigError("gan: seed_size must be a power of two >= 2");
    schedule.validate(seed_size);
    if (w_gd < 0.0 || w_gd > 1.0) throw ConfigError("gan: w_gd must lie in [0,1]");
    if (latent_dim < 1 || noise_dim < 1) throw ConfigError("gan: latent/noise dims must be >= 1");
    const int area = seed_size * seed_size;
    if (latent_dim % area != 0 || noise_dim % area != 0)
        throw ConfigError("gan: latent_dim and noise_dim must be divisible by seed_size^2");
    if (fade_in_fraction < 0.0 || fade_in_fraction > 1.0)
        throw ConfigError("gan: fade_in_fraction must lie in [0,1]");
    if (base_channels < 1 || critic_iters < 1 || gp_weight < 0.0 || !(lr_g > 0.0) || !(lr_d > 0.0))
        throw ConfigError("gan: bad optimizer/architecture settings");
}

double combined_loss(double l_ld, double l_gd, double w_gd) {
    if (w_gd < 0.0 || w_gd > 1.0) throw InputError("combined_loss: w_gd must lie in [0,1]");
    return (1.0 - w_gd) * l_ld + w_gd * l_gd;
}

std::vector<double> TrainingHistory::curve(Network net) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        switch (net) {
            case Network::generator: out.push_back(r.generator_loss); break;
            case Network::local_d: out.push_back(r.l_ld); break;
            case Network::global_d: out.push_back(r.l_gd); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Critic
// ---------------------------------------------------------------------------

namespace {

int levels_for(int input_res) {
    int n = 0;
    int r = input_res;
    while (r > 4) {
        r /= 2;
        ++n;
    }
    if ((4 << n) != input_res) throw ConfigError("critic: input resolution must be 4*2^n");
    return n;
}

Tensor flatten(const Tensor& t) {
    Tensor out(t.n, t.c * t.h * t.w, 1, 1);
    out.v = t.v;
    return out;
}

Tensor unflatten(const Tensor& t, int c, int h, int w) {
    Tensor out(t.n, c, h, w);
    out.v = t.v;
    return out;
}

}  // namespace

Critic::Critic(int input_res, int channels, Rng& rng) : channels_(channels) {
    const int n = levels_for(input_res);
    for (int i = 0; i < n; ++i) {
        blocks_.emplace_back(channels_, channels_, 3, 2, rng);
        from_image_.emplace_back(1, channels_, 1, 1, rng);
    }
    head_ = nn::Dense(channels_ * 16, 1, rng);
}

void Critic::grow(Rng& rng) {
    blocks_.emplace_back(channels_, channels_, 3, 2, rng);
    from_image_.emplace_back(1, channels_, 1, 1, rng);
}

Tensor Critic::forward(const Tensor& x, double alpha, Cache* cache) const {
    const int n = depth();
    if (x.h != input_res() || x.w != input_res() || x.c != 1)
        throw InputError("critic: input must be (B,1," + std::to_string(input_res()) + "^2)");
    Cache local_cache;
    Cache& c = cache ? *cache : local_cache;
    c.x = x;
    c.alpha = alpha;
    c.fade = alpha < 1.0 && n >= 2;
    c.block_in.assign(n, Tensor());
    c.block_pre.assign(n, Tensor());

    c.top_pre = from_image_[n - 1].forward(x);
    c.top_act = nn::leaky_relu(c.top_pre);
    c.tb_pre = blocks_[n - 1].forward(c.top_act);
    Tensor t = nn::leaky_relu(c.tb_pre);
    if (c.fade) {
        c.pool = nn::avgpool2x(x);
        c.prev_pre = from_image_[n - 2].forward(c.pool);
        const Tensor p = nn::leaky_relu(c.prev_pre);
        for (std::size_t i = 0; i < t.size(); ++i)
            t.v[i] = alpha * t.v[i] + (1.0 - alpha) * p.v[i];
    }
    for (int i = n - 2; i >= 0; --i) {
        c.block_in[i] = t;
        c.block_pre[i] = blocks_[i].forward(t);
        t = nn::leaky_relu(c.block_pre[i]);
    }
    c.head_in = flatten(t);
    return head_.forward(c.head_in);
}

void Critic::backward_params(const Cache& c, const Tensor& gy) {
    const int n = depth();
    head_.grad_params(c.head_in, gy);
    Tensor u = unflatten(head_.backward_input(gy), channels_, 4, 4);
    for (int i = 0; i <= n - 2; ++i) {
        const Tensor u_pre = nn::leaky_relu_backward(c.block_pre[i], u);
        blocks_[i].grad_params(c.block_in[i], u_pre);
        u = blocks_[i].backward_input(u_pre, c.block_in[i].h, c.block_in[i].w);
    }
    Tensor u_top = u;
    if (c.fade) {
        Tensor u_prev = Tensor::like(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u_prev.v[i] = (1.0 - c.alpha) * u.v[i];
            u_top.v[i] = c.alpha * u.v[i];
        }
        const Tensor up_pre = nn::leaky_relu_backward(c.prev_pre, u_prev);
        from_image_[n - 2].grad_params(c.pool, up_pre);
    }
    const Tensor ut_pre = nn::leaky_relu_backward(c.tb_pre, u_top);
    blocks_[n - 1].grad_params(c.top_act, ut_pre);
    const Tensor u2 = blocks_[n - 1].backward_input(ut_pre, c.top_act.h, c.top_act.w);
    const Tensor utp = nn::leaky_relu_backward(c.top_pre, u2);
    from_image_[n - 1].grad_params(c.x, utp);
}

Tensor Critic::backward_input(const Cache& c, const Tensor& gy, CotCache* record) const {
    const int n = depth();
    if (record) record->block.assign(n, Tensor());
    if (record) record->head_out = gy;
    Tensor u = unflatten(head_.backward_input(gy), channels_, 4, 4);
    for (int i = 0; i <= n - 2; ++i) {
        const Tensor u_pre = nn::leaky_relu_backward(c.block_pre[i], u);
        if (record) record->block[i] = u_pre;
        u = blocks_[i].backward_input(u_pre, c.block_in[i].h, c.block_in[i].w);
    }
    Tensor u_top = u;
    Tensor gx_prev;
    if (c.fade) {
        Tensor u_prev = Tensor::like(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u_prev.v[i] = (1.0 - c.alpha) * u.v[i];
            u_top.v[i] = c.alpha * u.v[i];
        }
        const Tensor up_pre = nn::leaky_relu_backward(c.prev_pre, u_prev);
        if (record) record->fromprev = up_pre;
        const Tensor u_pool = from_image_[n - 2].backward_input(up_pre, c.pool.h, c.pool.w);
        gx_prev = nn::avgpool2x_backward(u_pool);
    }
    const Tensor ut_pre = nn::leaky_relu_backward(c.tb_pre, u_top);
    if (record) record->topblock = ut_pre;
    const Tensor u2 = blocks_[n - 1].backward_input(ut_pre, c.top_act.h, c.top_act.w);
    const Tensor utp = nn::leaky_relu_backward(c.top_pre, u2);
    if (record) record->fromtop = utp;
    Tensor gx = from_image_[n - 1].backward_input(utp, c.x.h, c.x.w);
    if (c.fade)
        for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += gx_prev.v[i];
    return gx;
}

void Critic::gp_double(const Cache& c, const CotCache& cot, const Tensor& h) {
    const int n = depth();
    // adjoint sweep in forward direction with frozen activation masks; biases
    // contribute nothing to the input gradient almost everywhere
    from_image_[n - 1].grad_params(h, cot.fromtop, false);
    Tensor ht = from_image_[n - 1].forward_nobias(h);
    ht = nn::leaky_relu_backward(c.top_pre, ht);
    blocks_[n - 1].grad_params(ht, cot.topblock, false);
    ht = blocks_[n - 1].forward_nobias(ht);
    ht = nn::leaky_relu_backward(c.tb_pre, ht);

    Tensor merged;
    if (c.fade) {
        Tensor hp = nn::avgpool2x(h);
        from_image_[n - 2].grad_params(hp, cot.fromprev, false);
        hp = from_image_[n - 2].forward_nobias(hp);
        hp = nn::leaky_relu_backward(c.prev_pre, hp);
        merged = Tensor::like(ht);
        for (std::size_t i = 0; i < ht.size(); ++i)
            merged.v[i] = c.alpha * ht.v[i] + (1.0 - c.alpha) * hp.v[i];
    } else {
        merged = ht;
    }
    for (int i = n - 2; i >= 0; --i) {
        blocks_[i].grad_params(merged, cot.block[i], false);
        merged = blocks_[i].forward_nobias(merged);
        merged = nn::leaky_relu_backward(c.block_pre[i], merged);
    }
    head_.grad_params(flatten(merged), cot.head_out, false);
}

std::vector<nn::Param*> Critic::params() {
    std::vector<nn::Param*> ps;
    for (auto& b : blocks_) {
        ps.push_back(&b.W);
        ps.push_back(&b.b);
    }
    for (auto& f : from_image_) {
        ps.push_back(&f.W);
        ps.push_back(&f.b);
    }
    ps.push_back(&head_.W);
    ps.push_back(&head_.b);
    return ps;
}

std::vector<std::pair<std::string, std::vector<double>*>> Critic::named_state(
    const std::string& prefix) {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        out.emplace_back(prefix + ".block" + std::to_string(i) + ".W", &blocks_[i].W.w);
        out.emplace_back(prefix + ".block" + std::to_string(i) + ".b", &blocks_[i].b.w);
        out.emplace_back(prefix + ".from" + std::to_string(i) + ".W", &from_image_[i].W.w);
        out.emplace_back(prefix + ".from" + std::to_string(i) + ".b", &from_image_[i].b.w);
    }
    out.emplace_back(prefix + ".head.W", &head_.W.w);
    out.emplace_back(prefix + ".head.b", &head_.b.w);
    return out;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

Generator::Generator(const GanConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int area = cfg.seed_size * cfg.seed_size;
    const int in_ch = (3 * cfg.latent_dim + cfg.noise_dim) / area;
    combiner_ = nn::Conv2d(in_ch, cfg.base_channels, 3, 1, rng);
    int res = cfg.seed_size;
    while (res < cfg.schedule.steps[0].resolution) {
        blocks_.emplace_back(cfg.base_channels, cfg.base_channels, 3, 1, rng);
        res *= 2;
    }
    to_image_.emplace_back(cfg.base_channels, 1, 1, 1, rng);
}

void Generator::grow(Rng& rng) {
    blocks_.emplace_back(cfg_.base_channels, cfg_.base_channels, 3, 1, rng);
    to_image_.emplace_back(cfg_.base_channels, 1, 1, 1, rng);
}

Tensor Generator::combine(const std::vector<ConditioningInput>& batch) const {
    if (batch.empty()) throw InputError("combine_conditioning: empty batch");
    const int seed = cfg_.seed_size;
    const int area = seed * seed;
    const int zc = cfg_.latent_dim / area;
    const int nc = cfg_.noise_dim / area;
    Tensor x0(static_cast<int>(batch.size()), 3 * zc + nc, seed, seed);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& c = batch[b];
        if (static_cast<int>(c.z_tl.size()) != cfg_.latent_dim ||
            static_cast<int>(c.z_tr.size()) != cfg_.latent_dim ||
            static_cast<int>(c.z_bl.size()) != cfg_.latent_dim ||
            static_cast<int>(c.noise.size()) != cfg_.noise_dim)
            throw InputError("combine_conditioning: vector length mismatch");
        double* dst = x0.plane(static_cast<int>(b), 0);
        std::copy(c.z_tl.begin(), c.z_tl.end(), dst);
        std::copy(c.z_tr.begin(), c.z_tr.end(), dst + static_cast<std::size_t>(zc) * area);
        std::copy(c.z_bl.begin(), c.z_bl.end(), dst + 2 * static_cast<std::size_t>(zc) * area);
        std::copy(c.noise.begin(), c.noise.end(), dst + 3 * static_cast<std::size_t>(zc) * area);
    }
    return nn::leaky_relu(combiner_.forward(x0));
}

Tensor Generator::forward(const std::vector<ConditioningInput>& batch, int step, double alpha,
                          Cache* cache) const {
    Cache local_cache;
    Cache& c = cache ? *cache : local_cache;
    c.step = step;
    c.alpha = alpha;

    const int seed = cfg_.seed_size;
    const int area = seed * seed;
    const int zc = cfg_.latent_dim / area;
    const int nc = cfg_.noise_dim / area;
    c.x0 = Tensor(static_cast<int>(batch.size()), 3 * zc + nc, seed, seed);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ci = batch[b];
        if (static_cast<int>(ci.z_tl.size()) != cfg_.latent_dim ||
            static_cast<int>(ci.z_tr.size()) != cfg_.latent_dim ||
            static_cast<int>(ci.z_bl.size()) != cfg_.latent_dim ||
            static_cast<int>(ci.noise.size()) != cfg_.noise_dim)
            throw InputError("generator: conditioning length mismatch");
        double* dst = c.x0.plane(static_cast<int>(b), 0);
        std::copy(ci.z_tl.begin(), ci.z_tl.end(), dst);
        std::copy(ci.z_tr.begin(), ci.z_tr.end(), dst + static_cast<std::size_t>(zc) * area);
        std::copy(ci.z_bl.begin(), ci.z_bl.end(), dst + 2 * static_cast<std::size_t>(zc) * area);
        std::copy(ci.noise.begin(), ci.noise.end(), dst + 3 * static_cast<std::size_t>(zc) * area);
    }

    int res = seed;
    const int target = cfg_.schedule.steps[step].resolution;
    int m = 0;
    while (res < target) {
        res *= 2;
        ++m;
    }
    c.block_in.assign(m, Tensor());
    c.block_pre.assign(m, Tensor());

    c.comb_pre = combiner_.forward(c.x0);
    Tensor f = nn::leaky_relu(c.comb_pre);
    Tensor prev_feat;
    for (int i = 0; i < m; ++i) {
        if (i == m - 1) prev_feat = f;
        c.block_in[i] = nn::upsample2x(f);
        c.block_pre[i] = blocks_[i].forward(c.block_in[i]);
        f = nn::leaky_relu(c.block_pre[i]);
    }

    c.fine_in = f;
    c.fine_tanh = nn::tanh_act(to_image_[step].forward(f));
    c.fade = step > 0 && alpha < 1.0;
    if (!c.fade) return c.fine_tanh;

    c.prev_in = prev_feat;
    c.coarse_tanh = nn::tanh_act(to_image_[step - 1].forward(prev_feat));
    const Tensor up = nn::upsample2x(c.coarse_tanh);
    Tensor out = Tensor::like(c.fine_tanh);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = alpha * c.fine_tanh.v[i] + (1.0 - alpha) * up.v[i];
    return out;
}

void Generator::backward(const Cache& c, const Tensor& gy) {
    const int m = static_cast<int>(c.block_pre.size());
    Tensor g_fine = gy;
    Tensor g_prev_extra;
    if (c.fade) {
        Tensor g_coarse_up = Tensor::like(gy);
        for (std::size_t i = 0; i < gy.size(); ++i) {
            g_fine.v[i] = c.alpha * gy.v[i];
            g_coarse_up.v[i] = (1.0 - c.alpha) * gy.v[i];
        }
        const Tensor g_coarse = nn::upsample2x_backward(g_coarse_up);
        const Tensor gc = nn::tanh_backward(c.coarse_tanh, g_coarse);
        to_image_[c.step - 1].grad_params(c.prev_in, gc);
        g_prev_extra = to_image_[c.step - 1].backward_input(gc, c.prev_in.h, c.prev_in.w);
    }
    const Tensor gf_pre = nn::tanh_backward(c.fine_tanh, g_fine);
    to_image_[c.step].grad_params(c.fine_in, gf_pre);
    Tensor g = to_image_[c.step].backward_input(gf_pre, c.fine_in.h, c.fine_in.w);

    for (int i = m - 1; i >= 0; --i) {
        const Tensor g_pre = nn::leaky_relu_backward(c.block_pre[i], g);
        blocks_[i].grad_params(c.block_in[i], g_pre);
        g = blocks_[i].backward_input(g_pre, c.block_in[i].h, c.block_in[i].w);
        g = nn::upsample2x_backward(g);
        if (c.fade && i == m - 1)
            for (std::size_t p = 0; p < g.size(); ++p) g.v[p] += g_prev_extra.v[p];
    }
    const Tensor g_comb = nn::leaky_relu_backward(c.comb_pre, g);
    combiner_.grad_params(c.x0, g_comb);
}

std::vector<nn::Param*> Generator::params() {
    std::vector<nn::Param*> ps{&combiner_.W, &combiner_.b};
    for (auto& b : blocks_) {
        ps.push_back(&b.W);
        ps.push_back(&b.b);
    }
    for (auto& t : to_image_) {
        ps.push_back(&t.W);
        ps.push_back(&t.b);
    }
    return ps;
}

std::vector<std::pair<std::string, std::vector<double>*>> Generator::named_state() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    out.emplace_back("gen.combiner.W", &combiner_.W.w);
    out.emplace_back("gen.combiner.b", &combiner_.b.w);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        out.emplace_back("gen.block" + std::to_string(i) + ".W", &blocks_[i].W.w);
        out.emplace_back("gen.block" + std::to_string(i) + ".b", &blocks_[i].b.w);
    }
    for (std::size_t i = 0; i < to_image_.size(); ++i) {
        out.emplace_back("gen.to_image" + std::to_string(i) + ".W", &to_image_[i].W.w);
        out.emplace_back("gen.to_image" + std::to_string(i) + ".b", &to_image_[i].b.w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GanModel
// ---------------------------------------------------------------------------

GanModel::GanModel(const GanConfig& cfg, std::uint64_t seed) : cfg_(cfg), growth_seed_(seed) {
    cfg_.validate();
    Rng rng(sub_seed(seed, 0x6A0));
    gen_ = Generator(cfg_, rng);
    const int s0 = cfg_.schedule.steps[0].resolution;
    local_ = Critic(s0, cfg_.base_channels, rng);
    global_ = Critic(2 * s0, cfg_.base_channels, rng);
}

double GanModel::alpha() const {
    if (cur_step_ == 0 || cfg_.fade_in_fraction <= 0.0) return 1.0;
    const double span =
        cfg_.fade_in_fraction * static_cast<double>(cfg_.schedule.steps[cur_step_].images_to_show);
    return std::min(1.0, static_cast<double>(images_in_step_) / span);
}

void GanModel::grow_step() {
    if (cur_step_ + 1 >= static_cast<int>(cfg_.schedule.steps.size()))
        throw StateError("grow_step: already at the final schedule step");
    Rng rng(sub_seed(growth_seed_, 0x9801 + cur_step_));
    gen_.grow(rng);
    local_.grow(rng);
    global_.grow(rng);
    cur_step_++;
    images_in_step_ = 0;
}

Tensor GanModel::generate_raw(const std::vector<ConditioningInput>& batch, int resolution,
                              double alpha) const {
    int step = -1;
    for (std::size_t i = 0; i < cfg_.schedule.steps.size(); ++i)
        if (cfg_.schedule.steps[i].resolution == resolution) step = static_cast<int>(i);
    if (step < 0) throw InputError("generate: resolution not in the schedule");
    if (step > cur_step_)
        throw StateError("generate: resolution " + std::to_string(resolution) +
                         " not grown yet (current " + std::to_string(current_resolution()) + ")");
    if (alpha < 0.0 || alpha > 1.0) throw InputError("generate: alpha must lie in [0,1]");
    return gen_.forward(batch, step, alpha);
}

Tile GanModel::generate_quadrant(const ConditioningInput& c, int resolution, double alpha) const {
    const Tensor out = generate_raw({c}, resolution, alpha);
    Tile t;
    t.size = resolution;
    t.px.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = (out.v[i] + 1.0) * 127.5;
        t.px[i] = static_cast<std::uint8_t>(std::floor(std::min(255.0, std::max(0.0, v)) + 0.5));
    }
    return t;
}

namespace {

Tensor tile_to_signed(const Tile& t) {
    Tensor x(1, 1, t.size, t.size);
    for (std::size_t i = 0; i < t.px.size(); ++i) x.v[i] = t.px[i] / 127.5 - 1.0;
    return x;
}

}  // namespace

std::pair<double, double> GanModel::discriminator_scores(const Tile& quadrant,
                                                         const Tile& full_image,
                                                         double alpha) const {
    const int s = current_resolution();
    if (quadrant.size != s || full_image.size != 2 * s)
        throw InputError("discriminator_scores: quadrant must be " + std::to_string(s) +
                         " and full image " + std::to_string(2 * s));
    const Tensor lq = local_.forward(tile_to_signed(quadrant), alpha);
    const Tensor lf = global_.forward(tile_to_signed(full_image), alpha);
    return {lq.v[0], lf.v[0]};
}

std::vector<std::pair<std::string, std::vector<double>*>> GanModel::named_state() {
    auto out = gen_.named_state();
    for (auto& e : local_.named_state("local")) out.push_back(e);
    for (auto& e : global_.named_state("global")) out.push_back(e);
    return out;
}

std::vector<long> GanModel::shape_tag() {
    std::vector<long> tag{cfg_.latent_dim, cfg_.noise_dim, cfg_.base_channels, cfg_.seed_size,
                          static_cast<long>(cfg_.schedule.steps.size()), cur_step_};
    for (const auto& s : cfg_.schedule.steps) tag.push_back(s.resolution);
    return tag;
}

Tile assemble_full(const Tile& tl, const Tile& tr, const Tile& bl, const Tile& generated_br) {
    return assemble_quadrants(tl, tr, bl, generated_br);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CriticUpdateResult {
    double loss = 0.0;
};

// One WGAN-GP critic step: E[D(fake)] - E[D(real)] + gp_weight * penalty.
CriticUpdateResult update_critic_wgan(Critic& critic, nn::Adam& opt, const Tensor& real,
                                      const Tensor& fake, double alpha, double gp_weight,
                                      Rng& eps_rng) {
    const int B = real.n;
    opt.zero_grad();
    Critic::Cache c_real, c_fake;
    const Tensor lr = critic.forward(real, alpha, &c_real);
    const Tensor lf = critic.forward(fake, alpha, &c_fake);
    double mean_real = 0.0, mean_fake = 0.0;
    for (int i = 0; i < B; ++i) {
        mean_real += lr.v[i];
        mean_fake += lf.v[i];
    }
    mean_real /= B;
    mean_fake /= B;

    Tensor seed_real(B, 1, 1, 1), seed_fake(B, 1, 1, 1);
    for (int i = 0; i < B; ++i) {
        seed_real.v[i] = -1.0 / B;
        seed_fake.v[i] = 1.0 / B;
    }
    critic.backward_params(c_real, seed_real);
    critic.backward_params(c_fake, seed_fake);

    // gradient penalty on interpolates
    Tensor xhat = Tensor::like(real);
    for (int i = 0; i < B; ++i) {
        const double eps = eps_rng.uniform();
        const double* rp = real.plane(i, 0);
        const double* fp = fake.plane(i, 0);
        double* hp = xhat.plane(i, 0);
        for (int p = 0; p < real.h * real.w; ++p) hp[p] = eps * rp[p] + (1.0 - eps) * fp[p];
    }
    Critic::Cache c_hat;
    Critic::CotCache cot;
    critic.forward(xhat, alpha, &c_hat);
    Tensor ones(B, 1, 1, 1);
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    const Tensor g = critic.backward_input(c_hat, ones, &cot);

    double penalty = 0.0;
    Tensor h = Tensor::like(g);
    for (int i = 0; i < B; ++i) {
        const double* gp = g.plane(i, 0);
        double norm2 = 0.0;
        for (int p = 0; p < g.h * g.w; ++p) norm2 += gp[p] * gp[p];
        const double norm = std::sqrt(norm2);
        penalty += (norm - 1.0) * (norm - 1.0) / B;
        const double coef = norm > 1e-12 ? gp_weight * 2.0 * (norm - 1.0) / (norm * B) : 0.0;
        double* hp = h.plane(i, 0);
        for (int p = 0; p < g.h * g.w; ++p) hp[p] = coef * gp[p];
    }
    critic.gp_double(c_hat, cot, h);
    opt.step();
    return {mean_fake - mean_real + gp_weight * penalty};
}

// Non-saturating critic step: E[softplus(-D(real))] + E[softplus(D(fake))].
CriticUpdateResult update_critic_ns(Critic& critic, nn::Adam& opt, const Tensor& real,
                                    const Tensor& fake, double alpha) {
    const int B = real.n;
    opt.zero_grad();
    Critic::Cache c_real, c_fake;
    const Tensor lr = critic.forward(real, alpha, &c_real);
    const Tensor lf = critic.forward(fake, alpha, &c_fake);
    double loss = 0.0;
    Tensor seed_real(B, 1, 1, 1), seed_fake(B, 1, 1, 1);
    for (int i = 0; i < B; ++i) {
        loss += (softplus(-lr.v[i]) + softplus(lf.v[i])) / B;
        seed_real.v[i] = -sigmoid_s(-lr.v[i]) / B;
        seed_fake.v[i] = sigmoid_s(lf.v[i]) / B;
    }
    critic.backward_params(c_real, seed_real);
    critic.backward_params(c_fake, seed_fake);
    opt.step();
    return {loss};
}

// Generator-side adversarial term for one critic, with d(term)/d(logit).
double generator_term(AdvLoss kind, const Tensor& logits, Tensor& dlogits) {
    const int B = logits.n;
    dlogits = Tensor(B, 1, 1, 1);
    double term = 0.0;
    for (int i = 0; i < B; ++i) {
        if (kind == AdvLoss::wgan_gp) {
            term += -logits.v[i] / B;
            dlogits.v[i] = -1.0 / B;
        } else {
            term += softplus(-logits.v[i]) / B;
            dlogits.v[i] = -sigmoid_s(-logits.v[i]) / B;
        }
    }
    return term;
}

}  // namespace

GanModel train_gan(const Dataset& dataset, const std::map<int, const WaeModel*>& waes,
                   const GanConfig& config, std::uint64_t seed, TrainingHistory* history,
                   const std::function<void(const GanModel&, int step)>& on_step_end) {
    config.validate();
    for (const auto& step : config.schedule.steps) {
        const auto it = waes.find(step.resolution);
        if (it == waes.end() || it->second == nullptr)
            throw ConfigError("train_gan: no trained WAE for resolution " +
                              std::to_string(step.resolution) +
                              " (train it with train-wae first)");
        if (it->second->config().resolution != step.resolution)
            throw ConfigError("train_gan: WAE resolution mismatch for step " +
                              std::to_string(step.resolution));
        if (it->second->config().latent_dim != config.latent_dim)
            throw ConfigError("train_gan: WAE latent_dim must equal gan latent_dim");
    }

    std::vector<const Tile*> train_tiles;
    for (const auto& t : dataset.tiles)
        if (t.split == Split::train) train_tiles.push_back(&t);
    if (train_tiles.empty()) throw InputError("train_gan: dataset has no train tiles");
    const int max_full = 2 * config.schedule.steps.back().resolution;
    for (const auto* t : train_tiles)
        if (t->size < max_full)
            throw InputError("train_gan: tiles of " + std::to_string(t->size) +
                             "px cannot serve full images of " + std::to_string(max_full) + "px");

    GanModel model(config, seed);
    Rng batch_rng(sub_seed(seed, 0xBA7C4));
    Rng noise_rng(sub_seed(seed, 0x70153));
    Rng eps_rng(sub_seed(seed, 0xE9511));

    long iteration = 0;
    const int n_steps = static_cast<int>(config.schedule.steps.size());
    for (int k = 0; k < n_steps; ++k) {
        const auto& step = config.schedule.steps[k];
        const int S = step.resolution;
        const int B = step.batch_size;
        const WaeModel& wae = *waes.at(S);

        // one downscale pass per step
        std::vector<Tile> fulls;
        fulls.reserve(train_tiles.size());
        for (const auto* t : train_tiles) fulls.push_back(downscale(*t, 2 * S));

        nn::Adam opt_g(model.generator().params(), config.lr_g, 0.5, 0.99);
        nn::Adam opt_ld(model.local_d().params(), config.lr_d, 0.5, 0.99);
        nn::Adam opt_gd(model.global_d().params(), config.lr_d, 0.5, 0.99);

        while (model.images_in_step() < step.images_to_show) {
            const double alpha = model.alpha();

            // batch assembly: real full tiles, conditioning latents, noise
            Tensor real_q(B, 1, S, S), real_full(B, 1, 2 * S, 2 * S);
            Tensor ctx01(3 * B, 1, S, S);  // TL/TR/BL for the step's WAE
            std::vector<ConditioningInput> cond(B);
            for (int b = 0; b < B; ++b) {
                const Tile& full = fulls[batch_rng.below(fulls.size())];
                const auto q = quadrant_split(full);
                double* rq = real_q.plane(b, 0);
                for (std::size_t i = 0; i < q.br.px.size(); ++i)
                    rq[i] = q.br.px[i] / 127.5 - 1.0;
                double* rf = real_full.plane(b, 0);
                for (std::size_t i = 0; i < full.px.size(); ++i)
                    rf[i] = full.px[i] / 127.5 - 1.0;
                const Tile* ctx[3] = {&q.tl, &q.tr, &q.bl};
                for (int j = 0; j < 3; ++j) {
                    double* cp = ctx01.plane(3 * b + j, 0);
                    for (std::size_t i = 0; i < ctx[j]->px.size(); ++i)
                        cp[i] = ctx[j]->px[i] / 255.0;
                }
                cond[b].noise.resize(config.noise_dim);
                for (auto& v : cond[b].noise) v = noise_rng.normal();
            }
            const Tensor z = wae.encode_batch(ctx01);
            for (int b = 0; b < B; ++b) {
                auto row = [&](int j) {
                    const double* p = &z.v[static_cast<std::size_t>(3 * b + j) * config.latent_dim];
                    return LatentVector(p, p + config.latent_dim);
                };
                cond[b].z_tl = row(0);
                cond[b].z_tr = row(1);
                cond[b].z_bl = row(2);
            }

            // one generated quadrant feeds both discriminators this iteration
            Generator::Cache gen_cache;
            const Tensor fake_q = model.generator().forward(cond, k, alpha, &gen_cache);
            Tensor fake_full = real_full;
            for (int b = 0; b < B; ++b) {
                const double* fq = fake_q.plane(b, 0);
                double* ff = fake_full.plane(b, 0);
                for (int r = 0; r < S; ++r)
                    for (int c = 0; c < S; ++c)
                        ff[static_cast<std::size_t>(S + r) * 2 * S + S + c] =
                            fq[static_cast<std::size_t>(r) * S + c];
            }

            double l_ld = 0.0, l_gd = 0.0;
            for (int ci = 0; ci < config.critic_iters; ++ci) {
                if (config.adversarial_loss == AdvLoss::wgan_gp) {
                    l_ld = update_critic_wgan(model.local_d(), opt_ld, real_q, fake_q, alpha,
                                              config.gp_weight, eps_rng)
                               .loss;
                    l_gd = update_critic_wgan(model.global_d(), opt_gd, real_full, fake_full,
                                              alpha, config.gp_weight, eps_rng)
                               .loss;
                } else {
                    l_ld = update_critic_ns(model.local_d(), opt_ld, real_q, fake_q, alpha).loss;
                    l_gd = update_critic_ns(model.global_d(), opt_gd, real_full, fake_full, alpha)
                               .loss;
                }
            }

            // generator update against the combined loss
            Critic::Cache cl, cg;
            const Tensor logits_l = model.local_d().forward(fake_q, alpha, &cl);
            const Tensor logits_g = model.global_d().forward(fake_full, alpha, &cg);
            Tensor dll, dlg;
            const double term_l = generator_term(config.adversarial_loss, logits_l, dll);
            const double term_g = generator_term(config.adversarial_loss, logits_g, dlg);
            const double gen_loss = combined_loss(term_l, term_g, config.w_gd);
            for (int i = 0; i < B; ++i) {
                dll.v[i] *= 1.0 - config.w_gd;
                dlg.v[i] *= config.w_gd;
            }
            const Tensor g_from_local = model.local_d().backward_input(cl, dll);
            const Tensor g_full = model.global_d().backward_input(cg, dlg);
            Tensor g_fake = g_from_local;
            for (int b = 0; b < B; ++b) {
                const double* gf = g_full.plane(b, 0);
                double* gq = g_fake.plane(b, 0);
                for (int r = 0; r < S; ++r)
                    for (int c = 0; c < S; ++c)
                        gq[static_cast<std::size_t>(r) * S + c] +=
                            gf[static_cast<std::size_t>(S + r) * 2 * S + S + c];
            }
            opt_g.zero_grad();
            model.generator().backward(gen_cache, g_fake);
            opt_g.step();

            if (history) {
                LossBreakdown rec;
                rec.l_ld = l_ld;
                rec.l_gd = l_gd;
                rec.l_combined = combined_loss(l_ld, l_gd, config.w_gd);
                rec.generator_loss = gen_loss;
                rec.iteration = iteration;
                rec.resolution = S;
                rec.alpha = alpha;
                history->records.push_back(rec);
            }
            model.add_images(B);
            ++iteration;
        }

        if (on_step_end) on_step_end(model, k);
        if (k + 1 < n_steps) model.grow_step();
    }
    return model;
}

}  // namespace sargen
