#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sargen/nn/layers.hpp"
#include "sargen/tiles.hpp"
#include "sargen/wae.hpp"

namespace sargen {

enum class AdvLoss { wgan_gp, nonsaturating };

const char* to_string(AdvLoss l);
AdvLoss adv_loss_from_string(const std::string& s);

struct ScheduleStep {
    int resolution = 8;        // generated quadrant size; full tiles are 2x
    long images_to_show = 2000;
    int batch_size = 16;
};

struct ProgressiveSchedule {
    std::vector<ScheduleStep> steps;
    void validate(int seed_size) const;  // strictly doubling, power-of-two start
};

struct GanConfig {
    ProgressiveSchedule schedule;
    int latent_dim = 64;   // must match the conditioning WAEs
    int noise_dim = 64;
    double w_gd = 0.5;     // global-discriminator weight in the combined loss
    AdvLoss adversarial_loss = AdvLoss::wgan_gp;
    double fade_in_fraction = 0.5;
    double lr_g = 1e-3;
    double lr_d = 1e-3;
    int base_channels = 16;
    int critic_iters = 1;
    double gp_weight = 10.0;
    int seed_size = 4;  // spatial size of the combined conditioning features

    void validate() const;
};

/// Latents of the three visible quadrants (canonical orientation: missing
/// quadrant is bottom-right) plus the per-sample noise vector.
struct ConditioningInput {
    LatentVector z_tl, z_tr, z_bl;
    std::vector<double> noise;
};

/// (1 - w_gd) * l_ld + w_gd * l_gd.
double combined_loss(double l_ld, double l_gd, double w_gd);

/// One training iteration's loss record. l_ld / l_gd are the local and
/// global discriminator training losses, l_combined their weighted sum, and
/// generator_loss the generator's realized objective (itself the weighted
/// sum of its two adversarial terms).
struct LossBreakdown {
    double l_ld = 0, l_gd = 0, l_combined = 0, generator_loss = 0;
    long iteration = 0;
    int resolution = 0;
    double alpha = 1.0;
};

enum class Network { generator, local_d, global_d };

struct TrainingHistory {
    std::vector<LossBreakdown> records;
    /// Per-network loss curve view (one entry per iteration).
    std::vector<double> curve(Network net) const;
};

/// Progressive-growing critic; the global discriminator is the same network
/// one stride-2 stage deeper.
class Critic {
  public:
    Critic() = default;
    Critic(int input_res, int channels, Rng& rng);

    int input_res() const { return 4 << static_cast<int>(blocks_.size()); }
    int depth() const { return static_cast<int>(blocks_.size()); }
    void grow(Rng& rng);

    struct Cache {
        nn::Tensor x;
        double alpha = 1.0;
        bool fade = false;
        nn::Tensor top_pre, top_act;
        nn::Tensor tb_pre;
        nn::Tensor pool, prev_pre;
        std::vector<nn::Tensor> block_in;   // index i: input to blocks_[i], i <= depth-2
        std::vector<nn::Tensor> block_pre;  // conv output pre-activation
        nn::Tensor head_in;
    };
    /// Cotangents recorded by backward_input for the gradient-penalty pass.
    struct CotCache {
        nn::Tensor head_out;
        std::vector<nn::Tensor> block;  // cotangent at blocks_[i] output, post-mask
        nn::Tensor topblock, fromtop, fromprev;
    };

    /// Logits, one per sample; x is (B,1,R,R) with R = input_res().
    nn::Tensor forward(const nn::Tensor& x, double alpha, Cache* cache = nullptr) const;
    void backward_params(const Cache& cache, const nn::Tensor& gy);
    nn::Tensor backward_input(const Cache& cache, const nn::Tensor& gy,
                              CotCache* record = nullptr) const;
    /// Adds the gradient-penalty parameter gradients for d(sum h.g)/dtheta,
    /// where g is the input gradient backward_input produced with `record`.
    void gp_double(const Cache& cache, const CotCache& cot, const nn::Tensor& h);

    std::vector<nn::Param*> params();
    std::vector<std::pair<std::string, std::vector<double>*>> named_state(const std::string& prefix);

  private:
    int channels_ = 0;
    std::vector<nn::Conv2d> blocks_;      // blocks_[i]: features at 4*2^(i+1) -> 4*2^i
    std::vector<nn::Conv2d> from_image_;  // from_image_[i]: image at 4*2^(i+1) -> features
    nn::Dense head_;
};

/// Conditional progressive generator: one conv stage combines the three
/// context latents and the noise into seed features, stride-free upsample
/// blocks grow them, per-step 1x1 heads emit the image in [-1,1].
class Generator {
  public:
    Generator() = default;
    Generator(const GanConfig& cfg, Rng& rng);

    nn::Tensor combine(const std::vector<ConditioningInput>& batch) const;
    int grown_steps() const { return static_cast<int>(to_image_.size()); }
    void grow(Rng& rng);

    struct Cache {
        nn::Tensor x0;
        nn::Tensor comb_pre;
        std::vector<nn::Tensor> block_in;
        std::vector<nn::Tensor> block_pre;
        nn::Tensor fine_in, fine_tanh;
        bool fade = false;
        nn::Tensor prev_in, coarse_tanh;
        int step = 0;
        double alpha = 1.0;
    };
    /// Output in [-1,1], shape (B,1,S,S) for step's resolution S.
    nn::Tensor forward(const std::vector<ConditioningInput>& batch, int step, double alpha,
                       Cache* cache = nullptr) const;
    void backward(const Cache& cache, const nn::Tensor& gy);

    std::vector<nn::Param*> params();
    std::vector<std::pair<std::string, std::vector<double>*>> named_state();
    nn::Conv2d& combiner() { return combiner_; }

  private:
    GanConfig cfg_;
    nn::Conv2d combiner_;
    std::vector<nn::Conv2d> blocks_;    // blocks_[i]: 4*2^i -> 4*2^(i+1)
    std::vector<nn::Conv2d> to_image_;  // one per schedule step
};

/// Full model state: generator, both discriminators, growth position.
class GanModel {
  public:
    GanModel() = default;
    GanModel(const GanConfig& cfg, std::uint64_t seed);

    const GanConfig& config() const { return cfg_; }
    int current_step() const { return cur_step_; }
    int current_resolution() const { return cfg_.schedule.steps[cur_step_].resolution; }
    long images_in_step() const { return images_in_step_; }
    void add_images(long n) { images_in_step_ += n; }

    /// Linear fade-in over the first fade_in_fraction of the step's images;
    /// the first step always runs at alpha = 1.
    double alpha() const;

    /// Appends the next resolution's blocks and resets the fade.
    void grow_step();

    Generator& generator() { return gen_; }
    const Generator& generator() const { return gen_; }
    Critic& local_d() { return local_; }
    Critic& global_d() { return global_; }

    /// Generates the missing quadrant at a schedule resolution (state error
    /// if that step has not been grown yet).
    nn::Tensor generate_raw(const std::vector<ConditioningInput>& batch, int resolution,
                            double alpha) const;
    Tile generate_quadrant(const ConditioningInput& c, int resolution, double alpha) const;

    /// Local and global logits for a quadrant and the assembled image.
    std::pair<double, double> discriminator_scores(const Tile& quadrant, const Tile& full_image,
                                                   double alpha) const;

    std::uint64_t growth_seed() const { return growth_seed_; }
    std::vector<std::pair<std::string, std::vector<double>*>> named_state();
    std::vector<long> shape_tag();  // layout descriptor for checkpoint sanity

  private:
    GanConfig cfg_;
    Generator gen_;
    Critic local_, global_;
    int cur_step_ = 0;
    long images_in_step_ = 0;
    std::uint64_t growth_seed_ = 0;

    friend GanModel load_gan_checkpoint(const std::string& path);
};

/// The missing quadrant is bottom-right by convention; assemble the full
/// tile from three context quadrants and the generated one.
Tile assemble_full(const Tile& tl, const Tile& tr, const Tile& bl, const Tile& generated_br);

/// Trains the conditional progressive GAN. Requires a trained WAE per
/// schedule resolution (keyed by quadrant resolution). Deterministic given
/// the seed. on_step_end, when set, runs after each resolution step
/// completes (checkpointing hook).
GanModel train_gan(const Dataset& dataset, const std::map<int, const WaeModel*>& waes,
                   const GanConfig& config, std::uint64_t seed, TrainingHistory* history,
                   const std::function<void(const GanModel&, int step)>& on_step_end = {});

}  // namespace sargen
