#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace attrivae {

enum class ReconKind { bce, mse };

std::string to_string(ReconKind k);
ReconKind parse_recon_kind(const std::string& s);

// Which optional terms of the training objective are active.
struct VariantToggles {
  bool use_beta = true;
  bool use_mlp = true;
  bool use_ar = true;
  bool operator==(const VariantToggles&) const = default;
};

// The four ablations: VAE (no beta, MLP, AR), beta-VAE (no MLP, AR),
// AR-VAE (no MLP) and the full attribute-regularized model.
enum class Variant { vae, beta_vae, ar_vae, attri_vae };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
VariantToggles toggles_for(Variant v);

struct ModelConfig {
  int latent_dim = 64;
  int embedding_dim = 250;
  std::array<int, 5> conv_channels{16, 32, 64, 64, 64};
  std::array<int, 2> fc_hidden{512, 256};
  std::array<int, 2> mlp_hidden{64, 32};
  nn::Extent3 image_shape{64, 64, 1};
  ReconKind recon_loss_kind = ReconKind::bce;
  VariantToggles toggles{};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

template <typename T>
struct LatentBatch {
  nn::Matrix<T> mu;      // D x N
  nn::Matrix<T> logvar;  // D x N
};

// z = mu + noise * exp(logvar / 2), elementwise.
template <typename T>
nn::Matrix<T> reparameterize(const nn::Matrix<T>& mu, const nn::Matrix<T>& logvar, const nn::Matrix<T>& noise);

template <typename T>
class Model {
 public:
  struct ConvBlockCache {
    typename nn::Conv<T>::Cache conv;
    typename nn::BatchNorm<T>::Cache bn;
    std::vector<T> activation;  // post-ReLU output, for the ReLU mask
  };

  // Cache of the dense tail from the last conv feature maps to (mu, logvar).
  struct TailCache {
    std::array<typename nn::Linear<T>::Cache, 3> fc;
    std::array<nn::Matrix<T>, 3> fc_out;
    typename nn::Linear<T>::Cache head;
    int feature_batch = 0;
  };

  struct EncoderTape {
    std::array<ConvBlockCache, 5> blocks;
    TailCache tail;
  };

  struct DecoderTape {
    std::array<typename nn::Linear<T>::Cache, 4> fc;
    std::array<nn::Matrix<T>, 4> fc_out;
    std::array<ConvBlockCache, 4> blocks;
    typename nn::Conv<T>::Cache final_conv;
    std::vector<T> output;
  };

  struct ClassifierTape {
    std::array<typename nn::Linear<T>::Cache, 3> fc;
    std::array<nn::Matrix<T>, 2> hidden;
    nn::Matrix<T> output;
  };

  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  int latent_dim() const { return config_.latent_dim; }

  // Xavier-uniform weights, zero biases, unit batch-norm scales; reset
  // running statistics. Deterministic per seed.
  void init_weights(std::uint64_t seed);

  // Evaluation mode (running batch-norm statistics); pure in (weights, x).
  LatentBatch<T> encode(const nn::FeatureMap<T>& x) const;
  nn::FeatureMap<T> decode(const nn::Matrix<T>& z) const;
  nn::Matrix<T> classify(const nn::Matrix<T>& z) const;  // 1 x N, P(class 1)

  // Evaluation-mode pieces used by the attention maps.
  nn::FeatureMap<T> encode_features(const nn::FeatureMap<T>& x) const;
  nn::Matrix<T> features_to_mu(const nn::FeatureMap<T>& features, TailCache* cache) const;
  LatentBatch<T> features_to_latent(const nn::FeatureMap<T>& features, TailCache* cache) const;
  // d(sum_n grad_mu[:, n] . mu[:, n] + grad_logvar[:, n] . logvar[:, n]) / d features,
  // through the dense tail.
  nn::FeatureMap<T> features_gradient(const TailCache& cache, const nn::Matrix<T>& grad_mu,
                                      const nn::Matrix<T>* grad_logvar = nullptr) const;
  nn::Extent3 feature_extent() const { return extents_[5]; }
  int feature_channels() const { return config_.conv_channels[4]; }

  // Training passes: forward with tape, backward accumulating parameter
  // gradients and returning the gradient with respect to the pass input.
  LatentBatch<T> encode(const nn::FeatureMap<T>& x, nn::Mode mode, EncoderTape& tape);
  void encode_backward(const EncoderTape& tape, const nn::Matrix<T>& grad_mu, const nn::Matrix<T>& grad_logvar);
  nn::FeatureMap<T> decode(const nn::Matrix<T>& z, nn::Mode mode, DecoderTape& tape);
  // grad_output is with respect to the sigmoid output.
  nn::Matrix<T> decode_backward(const DecoderTape& tape, const nn::FeatureMap<T>& grad_output);
  nn::Matrix<T> classify(const nn::Matrix<T>& z, ClassifierTape& tape) const;
  nn::Matrix<T> classify_backward(const ClassifierTape& tape, const nn::Matrix<T>& grad_output);

  std::vector<nn::Param<T>*> parameters();
  // Batch-norm running statistics, in a fixed order.
  std::vector<std::vector<T>*> buffers();
  void zero_grad();

  nn::Linear<T>& mu_head() { return mu_head_; }
  const nn::Linear<T>& mu_head() const { return mu_head_; }
  nn::Linear<T>& encoder_dense(int i) { return enc_fc_[static_cast<std::size_t>(i)]; }

  // Converts weights and running statistics to another scalar type.
  template <typename U>
  Model<U> cast() const;

 private:
  template <typename U>
  friend class Model;

  nn::FeatureMap<T> run_conv_block(std::size_t i, bool decoder, const nn::FeatureMap<T>& in, nn::Mode mode,
                                   ConvBlockCache* cache);
  nn::FeatureMap<T> conv_block_backward(std::size_t i, bool decoder, const ConvBlockCache& cache,
                                        nn::FeatureMap<T> grad, bool need_input_grad);
  nn::FeatureMap<T> encoder_convs(const nn::FeatureMap<T>& x, nn::Mode mode, EncoderTape* tape);
  LatentBatch<T> encoder_tail(const nn::FeatureMap<T>& features, TailCache* cache) const;
  nn::FeatureMap<T> decoder_pass(const nn::Matrix<T>& z, nn::Mode mode, DecoderTape* tape);

  ModelConfig config_;
  std::array<nn::Extent3, 6> extents_;

  std::array<nn::Conv<T>, 5> enc_conv_;
  std::array<nn::BatchNorm<T>, 5> enc_bn_;
  std::array<nn::Linear<T>, 3> enc_fc_;
  nn::Linear<T> mu_head_, logvar_head_;

  std::array<nn::Linear<T>, 4> dec_fc_;
  std::array<nn::Conv<T>, 4> dec_conv_;
  std::array<nn::BatchNorm<T>, 4> dec_bn_;
  nn::Conv<T> dec_out_;

  std::array<nn::Linear<T>, 3> mlp_;
};

// Packs single-sample volumes (X*Y*Z values each, C-order) into a batch.
template <typename T>
nn::FeatureMap<T> make_batch(const std::vector<const std::vector<float>*>& volumes, nn::Extent3 extent);

}  // namespace attrivae
