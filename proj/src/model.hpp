#pragma once

// Encoder-only transformer over token grids. Token width equals the wavebook
// size lambda; the sequence axis is the window length l.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tokenizer.hpp"
#include "wavebook.hpp"

namespace wq4ts {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class HeadKind : std::uint32_t { kForecast = 0, kImpute = 1, kClassify = 2 };
enum class TokenizerKind : std::uint32_t { kWave = 0, kWindow = 1 };

const char* head_kind_name(HeadKind kind);

struct HeadSpec {
  HeadKind kind = HeadKind::kForecast;
  int outputs = 0;  // horizon c, window length l, or class count K

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct ModelConfig {
  int lambda = 16;
  int length = 96;
  int layers = 2;
  int d_k = 16;
  int n_heads = 4;
  int d_ff = 64;
  TokenizerKind tokenizer = TokenizerKind::kWave;
  int window_width = 0;  // ablation tokenizer only
  std::vector<HeadSpec> heads;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderLayerParams {
  Mat wq, wk, wv;         // lambda x d_k, lambda x d_k, lambda x lambda
  Mat ffn_in, ffn_out;    // lambda x d_ff, d_ff x lambda
  Vec ffn_in_bias, ffn_out_bias;
  Vec norm1_gain, norm1_bias, norm2_gain, norm2_bias;
};

struct HeadParams {
  HeadSpec spec;
  Mat weight;  // (lambda*l) x outputs for forecast/impute, lambda x K for classify
  Vec bias;
};

struct ModelParams {
  ModelConfig config;
  Mat pos_encoding;  // lambda x l
  Mat embed;         // lambda x window_width; empty for the wave tokenizer
  std::vector<EncoderLayerParams> layers;
  std::vector<HeadParams> heads;

  std::size_t parameter_count() const;
};

// Visits every tensor in declaration order (the checkpoint order).
template <class Params, class Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn("pos_encoding", p.pos_encoding);
  if (p.embed.size() > 0) fn("embed", p.embed);
  for (auto& layer : p.layers) {
    fn("wq", layer.wq);
    fn("wk", layer.wk);
    fn("wv", layer.wv);
    fn("ffn_in", layer.ffn_in);
    fn("ffn_in_bias", layer.ffn_in_bias);
    fn("ffn_out", layer.ffn_out);
    fn("ffn_out_bias", layer.ffn_out_bias);
    fn("norm1_gain", layer.norm1_gain);
    fn("norm1_bias", layer.norm1_bias);
    fn("norm2_gain", layer.norm2_gain);
    fn("norm2_bias", layer.norm2_bias);
  }
  for (auto& head : p.heads) {
    fn("head_weight", head.weight);
    fn("head_bias", head.bias);
  }
}

// Glorot-uniform matrices, zero biases, unit norm gains, N(0, 0.02^2) T_pos.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Same shapes, every entry zero.
ModelParams zeros_like(const ModelParams& p);

struct LayerCache {
  Mat input;                // l x lambda
  Mat xhat1, normed1;       // layer-norm 1
  Vec inv_std1;
  Mat q, k, v;
  std::vector<Mat> probs;   // per head, l x l
  Mat attn;                 // concatenated head outputs, l x lambda
  Mat mid;                  // input + attn
  Mat xhat2, normed2;
  Vec inv_std2;
  Mat pre_act, act;         // l x d_ff
};

struct ForwardCache {
  const ModelParams* params = nullptr;
  int head = 0;
  std::vector<double> window;  // raw input series
  Mat tokens;                  // l x lambda, before T_pos
  std::vector<LayerCache> layers;
  Mat final;                   // T^L as l x lambda
  Vec output;
};

// Rows of the token grid are tokenized responses (lambda x l).
Mat tokenize_window(std::span<const double> x, const Wavebook* book, const ModelParams& params);

// Standalone pieces, exposed for tests. tokens is l x lambda (token per row).
Mat attention(const Mat& tokens, const EncoderLayerParams& layer, int n_heads,
              std::vector<Mat>* probs = nullptr);
Mat encoder_layer_forward(const Mat& tokens, const EncoderLayerParams& layer, int n_heads,
                          LayerCache* cache = nullptr);

ForwardCache model_forward(std::span<const double> x, const Wavebook* book,
                           const ModelParams& params, int head = 0);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
void model_backward(const ForwardCache& cache, const ModelParams& params, const Vec& upstream,
                    ModelParams& grads);

// Checkpoint file ("WQMD").
struct CheckpointMeta {
  std::string version;
  std::string wavebook_path;
  std::string config_json;
};
void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta, const std::string& path);
ModelParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

double gelu(double x);
double gelu_grad(double x);

}  // namespace wq4ts
