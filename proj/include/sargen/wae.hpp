#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sargen/nn/layers.hpp"
#include "sargen/tiles.hpp"

namespace sargen {

enum class MmdKernel { rbf, imq };

const char* to_string(MmdKernel k);
MmdKernel mmd_kernel_from_string(const std::string& s);

struct WaeConfig {
    int resolution = 32;      // one of the schedule steps
    int latent_dim = 64;
    int conv_layers = 3;      // allowed range [3,6]
    double mmd_weight = 10.0;
    MmdKernel kernel = MmdKernel::rbf;
    std::vector<double> kernel_scales;  // squared bandwidths; empty -> default ladder
    double lr = 1e-3;
    int epochs = 20;
    int batch_size = 32;
    int base_channels = 8;
    int max_channels = 64;
    bool unbiased_mmd = false;  // biased V-statistic by default (provably >= 0)

    void validate() const;  // throws ConfigError
    /// Default squared-bandwidth ladder {D/8, D/4, D/2, D, 2D}.
    std::vector<double> scales_or_default() const;
};

using LatentVector = std::vector<double>;

/// Maximum mean discrepancy (squared), summed over kernel scales.
/// Biased V-statistic by default: mean k(x,x') + mean k(y,y') - 2 mean k(x,y),
/// which is >= 0 for positive-definite kernels and exactly 0 on identical
/// samples. Bit-exact under argument swap.
double mmd(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y,
           MmdKernel kernel, const std::vector<double>& scales, bool unbiased = false);

/// mmd plus its gradient with respect to the x samples.
double mmd_with_grad(const std::vector<LatentVector>& x, const std::vector<LatentVector>& y,
                     MmdKernel kernel, const std::vector<double>& scales,
                     std::vector<LatentVector>& gx);

struct WaeLossTerms {
    double total = 0, recon = 0, mmd = 0;  // total = recon + lambda * mmd
};

/// Loss arithmetic on already-computed pieces (pixels scaled to [0,1]).
WaeLossTerms wae_loss_terms(const nn::Tensor& batch01, const nn::Tensor& recon01,
                            const std::vector<LatentVector>& latents,
                            const std::vector<LatentVector>& prior, double lambda,
                            MmdKernel kernel, const std::vector<double>& scales);

struct EpochStats {
    int epoch = 0;
    double total = 0, recon = 0, mmd = 0;
};

/// Convolutional Wasserstein auto-encoder for one resolution step.
/// Encoder: conv_layers strided conv->batchnorm->leaky-rectifier blocks, then
/// a flattening projection to latent_dim. Decoder mirrors it.
class WaeModel {
  public:
    WaeModel() = default;
    WaeModel(const WaeConfig& config, std::uint64_t seed);

    const WaeConfig& config() const { return cfg_; }
    std::size_t param_count() const;
    /// Spatial side length after each encoder block.
    std::vector<int> encoder_spatial_sizes() const;

    /// Deterministic inference-mode encode/decode.
    LatentVector encode(const Tile& tile) const;
    Tile decode(const LatentVector& z) const;
    nn::Tensor encode_batch(const nn::Tensor& batch01) const;

    std::vector<EpochStats>& history() { return history_; }
    const std::vector<EpochStats>& history() const { return history_; }

    /// Training-mode loss over a [0,1] pixel batch (uses batch statistics).
    WaeLossTerms loss(const nn::Tensor& batch01, const std::vector<LatentVector>& prior,
                      double lambda);
    /// Same, but also accumulates parameter gradients.
    WaeLossTerms loss_backward(const nn::Tensor& batch01,
                               const std::vector<LatentVector>& prior, double lambda);

    std::vector<nn::Param*> params();
    /// Named views over parameters and batchnorm running statistics, for the
    /// checkpoint container.
    std::vector<std::pair<std::string, std::vector<double>*>> named_state();

  private:
    struct Cache;
    nn::Tensor encode_train(const nn::Tensor& x, Cache& cache);
    nn::Tensor decode_train(const nn::Tensor& z, Cache& cache);
    void backward(const Cache& cache, const nn::Tensor& gy_recon, const nn::Tensor& gz_extra);

    WaeConfig cfg_;
    std::vector<nn::Conv2d> enc_convs_;
    std::vector<nn::BatchNorm2d> enc_bns_;
    nn::Dense enc_head_;
    nn::Dense dec_head_;
    std::vector<nn::Conv2d> dec_convs_;
    std::vector<nn::BatchNorm2d> dec_bns_;
    nn::Conv2d dec_out_;
    std::vector<EpochStats> history_;
    std::vector<int> channels_;  // per encoder block
};

/// Builds an untrained model (spec-checked config).
WaeModel build_wae(const WaeConfig& config, std::uint64_t seed = 0);

/// Trains on tiles that must already be at config.resolution; records one
/// history entry per epoch. Deterministic given the seed.
WaeModel train_wae(const std::vector<Tile>& tiles, const WaeConfig& config, std::uint64_t seed);

}  // namespace sargen
