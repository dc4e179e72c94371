#include "core/model.hpp"

#include <cmath>
#include <stdexcept>

namespace attrivae {

using nn::Extent3;
using nn::FeatureMap;
using nn::Matrix;
using nn::Mode;

std::string to_string(ReconKind k) { return k == ReconKind::bce ? "bce" : "mse"; }

ReconKind parse_recon_kind(const std::string& s) {
  if (s == "bce") return ReconKind::bce;
  if (s == "mse") return ReconKind::mse;
  throw std::invalid_argument("recon_loss_kind: expected 'bce' or 'mse', got '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::vae: return "vae";
    case Variant::beta_vae: return "beta_vae";
    case Variant::ar_vae: return "ar_vae";
    case Variant::attri_vae: return "attri_vae";
  }
  return "attri_vae";
}

Variant parse_variant(const std::string& s) {
  if (s == "vae") return Variant::vae;
  if (s == "beta_vae") return Variant::beta_vae;
  if (s == "ar_vae") return Variant::ar_vae;
  if (s == "attri_vae") return Variant::attri_vae;
  throw std::invalid_argument("variant: expected one of vae, beta_vae, ar_vae, attri_vae; got '" + s + "'");
}

VariantToggles toggles_for(Variant v) {
  switch (v) {
    case Variant::vae: return {false, false, false};
    case Variant::beta_vae: return {true, false, false};
    case Variant::ar_vae: return {true, false, true};
    case Variant::attri_vae: return {true, true, true};
  }
  return {};
}

void ModelConfig::validate() const {
  if (latent_dim <= 0) throw std::invalid_argument("model.latent_dim must be positive");
  if (embedding_dim <= 0) throw std::invalid_argument("model.embedding_dim must be positive");
  if (latent_dim > embedding_dim)
    throw std::invalid_argument("model.latent_dim (" + std::to_string(latent_dim) +
                                ") must not exceed model.embedding_dim (" + std::to_string(embedding_dim) + ")");
  for (int c : conv_channels)
    if (c <= 0) throw std::invalid_argument("model.conv_channels entries must be positive");
  for (int h : fc_hidden)
    if (h <= 0) throw std::invalid_argument("model.fc_hidden entries must be positive");
  for (int h : mlp_hidden)
    if (h <= 0) throw std::invalid_argument("model.mlp_hidden entries must be positive");
  if (image_shape.x <= 0 || image_shape.y <= 0 || image_shape.z <= 0)
    throw std::invalid_argument("model.image_shape entries must be positive");
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& noise) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != noise.rows() ||
      mu.cols() != noise.cols())
    throw std::invalid_argument("reparameterize: mu, logvar and noise must share a shape");
  return (mu.array() + noise.array() * (logvar.array() * T(0.5)).exp()).matrix();
}

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto& ch = config_.conv_channels;
  extents_[0] = config_.image_shape;
  int in_channels = 1;
  for (std::size_t i = 0; i < 5; ++i) {
    const int stride = i < 4 ? 2 : 1;
    enc_conv_[i] = nn::Conv<T>("encoder.conv" + std::to_string(i), in_channels, ch[i], extents_[i], stride);
    enc_bn_[i] = nn::BatchNorm<T>("encoder.bn" + std::to_string(i), ch[i]);
    extents_[i + 1] = enc_conv_[i].out_extent();
    in_channels = ch[i];
  }
  const int flat = ch[4] * static_cast<int>(extents_[5].count());
  const auto& fh = config_.fc_hidden;
  enc_fc_[0] = nn::Linear<T>("encoder.fc0", flat, fh[0]);
  enc_fc_[1] = nn::Linear<T>("encoder.fc1", fh[0], fh[1]);
  enc_fc_[2] = nn::Linear<T>("encoder.fc2", fh[1], config_.embedding_dim);
  mu_head_ = nn::Linear<T>("encoder.mu", config_.embedding_dim, config_.latent_dim);
  logvar_head_ = nn::Linear<T>("encoder.logvar", config_.embedding_dim, config_.latent_dim);

  dec_fc_[0] = nn::Linear<T>("decoder.fc0", config_.latent_dim, config_.embedding_dim);
  dec_fc_[1] = nn::Linear<T>("decoder.fc1", config_.embedding_dim, fh[1]);
  dec_fc_[2] = nn::Linear<T>("decoder.fc2", fh[1], fh[0]);
  dec_fc_[3] = nn::Linear<T>("decoder.fc3", fh[0], flat);
  // Decoder level j runs at encoder extent e(4-j), mapping ch[4-j] -> ch[3-j].
  for (std::size_t j = 0; j < 4; ++j) {
    const std::size_t level = 4 - j;
    dec_conv_[j] = nn::Conv<T>("decoder.conv" + std::to_string(j), ch[level], ch[level - 1], extents_[level], 1);
    dec_bn_[j] = nn::BatchNorm<T>("decoder.bn" + std::to_string(j), ch[level - 1]);
  }
  dec_out_ = nn::Conv<T>("decoder.out", ch[0], 1, extents_[0], 1);

  const auto& mh = config_.mlp_hidden;
  mlp_[0] = nn::Linear<T>("classifier.fc0", config_.latent_dim, mh[0]);
  mlp_[1] = nn::Linear<T>("classifier.fc1", mh[0], mh[1]);
  mlp_[2] = nn::Linear<T>("classifier.fc2", mh[1], 1);
}

template <typename T>
std::vector<nn::Param<T>*> Model<T>::parameters() {
  std::vector<nn::Param<T>*> out;
  for (std::size_t i = 0; i < 5; ++i) {
    enc_conv_[i].collect(out);
    enc_bn_[i].collect(out);
  }
  for (auto& l : enc_fc_) l.collect(out);
  mu_head_.collect(out);
  logvar_head_.collect(out);
  for (auto& l : dec_fc_) l.collect(out);
  for (std::size_t j = 0; j < 4; ++j) {
    dec_conv_[j].collect(out);
    dec_bn_[j].collect(out);
  }
  dec_out_.collect(out);
  for (auto& l : mlp_) l.collect(out);
  return out;
}

template <typename T>
std::vector<std::vector<T>*> Model<T>::buffers() {
  std::vector<std::vector<T>*> out;
  for (auto& bn : enc_bn_) {
    out.push_back(&bn.running_mean());
    out.push_back(&bn.running_var());
  }
  for (auto& bn : dec_bn_) {
    out.push_back(&bn.running_mean());
    out.push_back(&bn.running_var());
  }
  return out;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
void Model<T>::init_weights(std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : parameters()) p->initialize(rng);
  for (auto& bn : enc_bn_) {
    std::fill(bn.running_mean().begin(), bn.running_mean().end(), T(0));
    std::fill(bn.running_var().begin(), bn.running_var().end(), T(1));
  }
  for (auto& bn : dec_bn_) {
    std::fill(bn.running_mean().begin(), bn.running_mean().end(), T(0));
    std::fill(bn.running_var().begin(), bn.running_var().end(), T(1));
  }
}

// ---------------------------------------------------------------- conv blocks

template <typename T>
FeatureMap<T> Model<T>::run_conv_block(std::size_t i, bool decoder, const FeatureMap<T>& in, Mode mode,
                                       ConvBlockCache* cache) {
  auto& conv = decoder ? dec_conv_[i] : enc_conv_[i];
  auto& bn = decoder ? dec_bn_[i] : enc_bn_[i];
  FeatureMap<T> y = conv.forward(in, cache ? &cache->conv : nullptr);
  FeatureMap<T> out = mode == Mode::train ? bn.forward(y, Mode::train, cache ? &cache->bn : nullptr)
                                          : bn.forward_eval(y, cache ? &cache->bn : nullptr);
  nn::relu_inplace(out.data);
  if (cache) cache->activation = out.data;
  return out;
}

template <typename T>
FeatureMap<T> Model<T>::conv_block_backward(std::size_t i, bool decoder, const ConvBlockCache& cache,
                                            FeatureMap<T> grad, bool need_input_grad) {
  auto& conv = decoder ? dec_conv_[i] : enc_conv_[i];
  auto& bn = decoder ? dec_bn_[i] : enc_bn_[i];
  nn::relu_backward_inplace(grad.data, cache.activation);
  FeatureMap<T> g = bn.backward(cache.bn, grad);
  return conv.backward(cache.conv, g, need_input_grad);
}

// ---------------------------------------------------------------- encoder

template <typename T>
FeatureMap<T> Model<T>::encoder_convs(const FeatureMap<T>& x, Mode mode, EncoderTape* tape) {
  if (x.channels != 1 || !(x.extent == config_.image_shape))
    throw std::invalid_argument("encode: expected input shape " + nn::to_string(config_.image_shape) +
                                ", got " + nn::to_string(x.extent) +
                                (x.channels != 1 ? " with " + std::to_string(x.channels) + " channels" : ""));
  FeatureMap<T> h = x;
  for (std::size_t i = 0; i < 5; ++i) h = run_conv_block(i, false, h, mode, tape ? &tape->blocks[i] : nullptr);
  return h;
}

template <typename T>
LatentBatch<T> Model<T>::encoder_tail(const FeatureMap<T>& features, TailCache* cache) const {
  Matrix<T> h = nn::flatten(features);
  if (cache) cache->feature_batch = features.batch;
  for (std::size_t i = 0; i < 3; ++i) {
    h = enc_fc_[i].forward(h, cache ? &cache->fc[i] : nullptr);
    h = h.cwiseMax(T(0));
    if (cache) cache->fc_out[i] = h;
  }
  if (cache) cache->head.input = h;
  return {mu_head_.forward(h, nullptr), logvar_head_.forward(h, nullptr)};
}

template <typename T>
LatentBatch<T> Model<T>::encode(const FeatureMap<T>& x) const {
  // Eval-mode passes never touch running statistics.
  auto* self = const_cast<Model<T>*>(this);
  return encoder_tail(self->encoder_convs(x, Mode::eval, nullptr), nullptr);
}

template <typename T>
FeatureMap<T> Model<T>::encode_features(const FeatureMap<T>& x) const {
  auto* self = const_cast<Model<T>*>(this);
  return self->encoder_convs(x, Mode::eval, nullptr);
}

template <typename T>
Matrix<T> Model<T>::features_to_mu(const FeatureMap<T>& features, TailCache* cache) const {
  return features_to_latent(features, cache).mu;
}

template <typename T>
LatentBatch<T> Model<T>::features_to_latent(const FeatureMap<T>& features, TailCache* cache) const {
  if (features.channels != feature_channels() || !(features.extent == feature_extent()))
    throw std::invalid_argument("features_to_latent: feature map shape mismatch");
  return encoder_tail(features, cache);
}

template <typename T>
FeatureMap<T> Model<T>::features_gradient(const TailCache& cache, const Matrix<T>& grad_mu,
                                          const Matrix<T>* grad_logvar) const {
  Matrix<T> g = mu_head_.backward_input(grad_mu);
  if (grad_logvar) g += logvar_head_.backward_input(*grad_logvar);
  for (std::size_t k = 3; k-- > 0;) {
    g = (cache.fc_out[k].array() > T(0)).select(g, T(0));
    g = enc_fc_[k].backward_input(g);
  }
  return nn::unflatten(g, feature_channels(), feature_extent());
}

template <typename T>
LatentBatch<T> Model<T>::encode(const FeatureMap<T>& x, Mode mode, EncoderTape& tape) {
  return encoder_tail(encoder_convs(x, mode, &tape), &tape.tail);
}

template <typename T>
void Model<T>::encode_backward(const EncoderTape& tape, const Matrix<T>& grad_mu, const Matrix<T>& grad_logvar) {
  const auto& tail = tape.tail;
  Matrix<T> g = mu_head_.backward(tail.head, grad_mu, true);
  g += logvar_head_.backward(tail.head, grad_logvar, true);
  for (std::size_t k = 3; k-- > 0;) {
    g = (tail.fc_out[k].array() > T(0)).select(g, T(0));
    g = enc_fc_[k].backward(tail.fc[k], g, true);
  }
  FeatureMap<T> gf = nn::unflatten(g, feature_channels(), feature_extent());
  for (std::size_t i = 5; i-- > 0;) gf = conv_block_backward(i, false, tape.blocks[i], std::move(gf), i > 0);
}

// ---------------------------------------------------------------- decoder

template <typename T>
FeatureMap<T> Model<T>::decoder_pass(const Matrix<T>& z, Mode mode, DecoderTape* tape) {
  if (z.rows() != config_.latent_dim)
    throw std::invalid_argument("decode: expected latent length " + std::to_string(config_.latent_dim) + ", got " +
                                std::to_string(z.rows()));
  Matrix<T> h = z;
  for (std::size_t i = 0; i < 4; ++i) {
    h = dec_fc_[i].forward(h, tape ? &tape->fc[i] : nullptr);
    h = h.cwiseMax(T(0));
    if (tape) tape->fc_out[i] = h;
  }
  FeatureMap<T> fm = nn::unflatten(h, config_.conv_channels[4], extents_[5]);
  for (std::size_t j = 0; j < 4; ++j) {
    const std::size_t level = 4 - j;
    if (!(fm.extent == extents_[level])) fm = nn::upsample_nearest(fm, extents_[level]);
    fm = run_conv_block(j, true, fm, mode, tape ? &tape->blocks[j] : nullptr);
  }
  fm = nn::upsample_nearest(fm, extents_[0]);
  fm = dec_out_.forward(fm, tape ? &tape->final_conv : nullptr);
  nn::sigmoid_inplace(fm.data);
  if (tape) tape->output = fm.data;
  return fm;
}

template <typename T>
FeatureMap<T> Model<T>::decode(const Matrix<T>& z) const {
  auto* self = const_cast<Model<T>*>(this);
  return self->decoder_pass(z, Mode::eval, nullptr);
}

template <typename T>
FeatureMap<T> Model<T>::decode(const Matrix<T>& z, Mode mode, DecoderTape& tape) {
  return decoder_pass(z, mode, &tape);
}

template <typename T>
Matrix<T> Model<T>::decode_backward(const DecoderTape& tape, const FeatureMap<T>& grad_output) {
  FeatureMap<T> g = grad_output;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const T y = tape.output[i];
    g.data[i] *= y * (T(1) - y);
  }
  g = dec_out_.backward(tape.final_conv, g, true);
  g = nn::upsample_nearest_backward(g, extents_[1]);
  for (std::size_t j = 4; j-- > 0;) {
    const std::size_t level = 4 - j;
    g = conv_block_backward(j, true, tape.blocks[j], std::move(g), true);
    if (level < 5 && !(extents_[level] == extents_[level + 1])) g = nn::upsample_nearest_backward(g, extents_[level + 1]);
  }
  Matrix<T> gm = nn::flatten(g);
  for (std::size_t i = 4; i-- > 0;) {
    gm = (tape.fc_out[i].array() > T(0)).select(gm, T(0));
    gm = dec_fc_[i].backward(tape.fc[i], gm, true);
  }
  return gm;
}

// ---------------------------------------------------------------- classifier

template <typename T>
Matrix<T> Model<T>::classify(const Matrix<T>& z) const {
  ClassifierTape tape;
  return classify(z, tape);
}

template <typename T>
Matrix<T> Model<T>::classify(const Matrix<T>& z, ClassifierTape& tape) const {
  if (z.rows() != config_.latent_dim)
    throw std::invalid_argument("classify: expected latent length " + std::to_string(config_.latent_dim));
  Matrix<T> h = z;
  for (std::size_t i = 0; i < 2; ++i) {
    h = mlp_[i].forward(h, &tape.fc[i]).cwiseMax(T(0));
    tape.hidden[i] = h;
  }
  Matrix<T> logits = mlp_[2].forward(h, &tape.fc[2]);
  tape.output = logits.unaryExpr([](T v) { return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))); });
  return tape.output;
}

template <typename T>
Matrix<T> Model<T>::classify_backward(const ClassifierTape& tape, const Matrix<T>& grad_output) {
  Matrix<T> g = (grad_output.array() * tape.output.array() * (T(1) - tape.output.array())).matrix();
  g = mlp_[2].backward(tape.fc[2], g, true);
  for (std::size_t i = 2; i-- > 0;) {
    g = (tape.hidden[i].array() > T(0)).select(g, T(0));
    g = mlp_[i].backward(tape.fc[i], g, true);
  }
  return g;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(config_);
  auto* self = const_cast<Model<T>*>(this);
  auto src = self->parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < src[i]->value.size(); ++j) dst[i]->value[j] = static_cast<U>(src[i]->value[j]);
  auto sb = self->buffers();
  auto db = out.buffers();
  for (std::size_t i = 0; i < sb.size(); ++i)
    for (std::size_t j = 0; j < sb[i]->size(); ++j) (*db[i])[j] = static_cast<U>((*sb[i])[j]);
  return out;
}

template <typename T>
FeatureMap<T> make_batch(const std::vector<const std::vector<float>*>& volumes, Extent3 extent) {
  FeatureMap<T> fm(1, static_cast<int>(volumes.size()), extent);
  const std::size_t vox = extent.count();
  for (std::size_t n = 0; n < volumes.size(); ++n) {
    if (volumes[n]->size() != vox)
      throw std::invalid_argument("encode: expected input shape " + nn::to_string(extent) + " (" +
                                  std::to_string(vox) + " voxels), got " + std::to_string(volumes[n]->size()) +
                                  " voxels");
    T* dst = fm.plane(0, static_cast<int>(n));
    for (std::size_t v = 0; v < vox; ++v) dst[v] = static_cast<T>((*volumes[n])[v]);
  }
  return fm;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Matrix<float> reparameterize(const Matrix<float>&, const Matrix<float>&, const Matrix<float>&);
template Matrix<double> reparameterize(const Matrix<double>&, const Matrix<double>&, const Matrix<double>&);
template FeatureMap<float> make_batch<float>(const std::vector<const std::vector<float>*>&, Extent3);
template FeatureMap<double> make_batch<double>(const std::vector<const std::vector<float>*>&, Extent3);

}  // namespace attrivae
