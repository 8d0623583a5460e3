#include "model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "binio.hpp"
#include "error.hpp"

namespace wq4ts {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kNormEps = 1e-5;

void glorot(Mat& m, int rows, int cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  m.resize(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
}

// Row-wise layer norm over the token dimension.
void layer_norm(const Mat& x, const Vec& gain, const Vec& bias, Mat& xhat, Vec& inv_std, Mat& out) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  xhat.resize(rows, cols);
  out.resize(rows, cols);
  inv_std.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kNormEps);
    inv_std(r) = is;
    xhat.row(r) = (x.row(r).array() - mean) * is;
    out.row(r) = xhat.row(r).array() * gain.transpose().array() + bias.transpose().array();
  }
}

// dx given d(xhat), per row.
Mat layer_norm_backward(const Mat& dxhat, const Mat& xhat, const Vec& inv_std) {
  Mat dx(dxhat.rows(), dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

// Softmax over each column; columns are contiguous so exp vectorizes.
void softmax_cols(Mat& s) {
  s.rowwise() -= s.colwise().maxCoeff();
  s = s.array().exp().matrix();
  s.array().rowwise() /= s.colwise().sum().array();
}

void check_layer_shapes(const Mat& tokens, const EncoderLayerParams& layer, int n_heads) {
  const Eigen::Index lambda = tokens.cols();
  if (layer.wq.rows() != lambda || layer.wk.rows() != lambda || layer.wv.rows() != lambda ||
      layer.wv.cols() != lambda || layer.wq.cols() != layer.wk.cols())
    throw ShapeError("attention: projection shapes do not match token width");
  if (n_heads < 1 || layer.wq.cols() % n_heads != 0 || lambda % n_heads != 0)
    throw ShapeError("attention: d_k and lambda must be divisible by n_heads");
}

}  // namespace

const char* head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::kForecast: return "forecast";
    case HeadKind::kImpute: return "impute";
    case HeadKind::kClassify: return "classify";
  }
  return "unknown";
}

void ModelConfig::validate() const {
  if (lambda < 1 || length < 1) throw ConfigError("model: lambda and length must be >= 1");
  if (layers < 1) throw ConfigError("model: at least one encoder layer is required");
  if (n_heads < 1 || d_k < 1) throw ConfigError("model: d_k and n_heads must be >= 1");
  if (d_k % n_heads != 0 || lambda % n_heads != 0)
    throw ConfigError("model: lambda and d_k must be divisible by n_heads");
  if (d_ff < lambda) throw ConfigError("model: d_ff must be >= lambda");
  if (tokenizer == TokenizerKind::kWindow && (window_width < 1 || window_width % 2 == 0))
    throw ConfigError("model: window tokenizer needs an odd window width");
  if (heads.empty()) throw ConfigError("model: at least one task head is required");
  for (const auto& h : heads) {
    if (h.outputs < 1) throw ConfigError("model: head output size must be >= 1");
    if (h.kind == HeadKind::kImpute && h.outputs != length)
      throw ConfigError("model: imputation head must output the window length");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.config = config;
  const int lambda = config.lambda, l = config.length;

  p.pos_encoding.resize(lambda, l);
  std::normal_distribution<double> pos_dist(0.0, 0.02);
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < lambda; ++i) p.pos_encoding(i, j) = pos_dist(rng);

  if (config.tokenizer == TokenizerKind::kWindow)
    glorot(p.embed, lambda, config.window_width, rng);

  p.layers.resize(config.layers);
  for (auto& layer : p.layers) {
    glorot(layer.wq, lambda, config.d_k, rng);
    glorot(layer.wk, lambda, config.d_k, rng);
    glorot(layer.wv, lambda, lambda, rng);
    glorot(layer.ffn_in, lambda, config.d_ff, rng);
    glorot(layer.ffn_out, config.d_ff, lambda, rng);
    layer.ffn_in_bias = Vec::Zero(config.d_ff);
    layer.ffn_out_bias = Vec::Zero(lambda);
    layer.norm1_gain = Vec::Ones(lambda);
    layer.norm1_bias = Vec::Zero(lambda);
    layer.norm2_gain = Vec::Ones(lambda);
    layer.norm2_bias = Vec::Zero(lambda);
  }

  for (const auto& spec : config.heads) {
    HeadParams h;
    h.spec = spec;
    const int fan_in = spec.kind == HeadKind::kClassify ? lambda : lambda * l;
    glorot(h.weight, fan_in, spec.outputs, rng);
    h.bias = Vec::Zero(spec.outputs);
    p.heads.push_back(std::move(h));
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for_each_tensor(z, [](const char*, auto& t) { t.setZero(); });
  return z;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Mat tokenize_window(std::span<const double> x, const Wavebook* book, const ModelParams& params) {
  const auto& cfg = params.config;
  if (static_cast<int>(x.size()) != cfg.length)
    throw ShapeError("model: window length " + std::to_string(x.size()) + " != configured " +
                     std::to_string(cfg.length));
  TokenGrid grid;
  if (cfg.tokenizer == TokenizerKind::kWave) {
    if (book == nullptr) throw PreconditionError("model: wave tokenizer needs a wavebook");
    if (book->lambda != cfg.lambda) throw ShapeError("model: wavebook size != lambda");
    grid = tokenize(x, *book);
  } else {
    // window_embed takes row-major weights; Mat is column-major.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weights = params.embed;
    grid = window_embed(x, std::span<const double>(weights.data(), weights.size()), cfg.lambda,
                        cfg.window_width);
  }
  Mat out(grid.lambda, grid.length);
  for (int i = 0; i < grid.lambda; ++i)
    for (int j = 0; j < grid.length; ++j) out(i, j) = grid.at(i, j);
  return out;
}

namespace {

Mat attention_from_qkv(const Mat& q, const Mat& k, const Mat& v, int n_heads, std::vector<Mat>* probs) {
  const Eigen::Index l = q.rows(), lambda = v.cols();
  const Eigen::Index dh = q.cols() / n_heads, dv = lambda / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat out(l, lambda);
  if (probs) probs->resize(n_heads);
  Mat st(l, l);
  for (int h = 0; h < n_heads; ++h) {
    // Column j of st holds the scores of query j.
    st.noalias() = k.middleCols(h * dh, dh) * q.middleCols(h * dh, dh).transpose();
    st *= scale;
    softmax_cols(st);
    out.middleCols(h * dv, dv).noalias() = st.transpose() * v.middleCols(h * dv, dv);
    if (probs) (*probs)[h] = st.transpose();
  }
  return out;
}

}  // namespace

Mat attention(const Mat& tokens, const EncoderLayerParams& layer, int n_heads, std::vector<Mat>* probs) {
  check_layer_shapes(tokens, layer, n_heads);
  return attention_from_qkv(tokens * layer.wq, tokens * layer.wk, tokens * layer.wv, n_heads, probs);
}

Mat encoder_layer_forward(const Mat& tokens, const EncoderLayerParams& layer, int n_heads, LayerCache* cache) {
  LayerCache local;
  LayerCache& c = cache ? *cache : local;
  c.input = tokens;
  layer_norm(tokens, layer.norm1_gain, layer.norm1_bias, c.xhat1, c.inv_std1, c.normed1);
  check_layer_shapes(c.normed1, layer, n_heads);
  c.q = c.normed1 * layer.wq;
  c.k = c.normed1 * layer.wk;
  c.v = c.normed1 * layer.wv;
  c.attn = attention_from_qkv(c.q, c.k, c.v, n_heads, &c.probs);
  c.mid = tokens + c.attn;
  layer_norm(c.mid, layer.norm2_gain, layer.norm2_bias, c.xhat2, c.inv_std2, c.normed2);
  c.pre_act = c.normed2 * layer.ffn_in;
  c.pre_act.rowwise() += layer.ffn_in_bias.transpose();
  c.act = c.pre_act.unaryExpr([](double x) { return gelu(x); });
  Mat out = c.act * layer.ffn_out;
  out.rowwise() += layer.ffn_out_bias.transpose();
  out += c.mid;
  return out;
}

ForwardCache model_forward(std::span<const double> x, const Wavebook* book, const ModelParams& params,
                           int head) {
  if (head < 0 || head >= static_cast<int>(params.heads.size()))
    throw ShapeError("model: head index out of range");
  ForwardCache cache;
  cache.params = &params;
  cache.head = head;
  cache.window.assign(x.begin(), x.end());
  cache.tokens = tokenize_window(x, book, params).transpose();
  Mat z = cache.tokens + params.pos_encoding.transpose();
  cache.layers.resize(params.layers.size());
  for (std::size_t k = 0; k < params.layers.size(); ++k)
    z = encoder_layer_forward(z, params.layers[k], params.config.n_heads, &cache.layers[k]);
  cache.final = std::move(z);

  const HeadParams& hp = params.heads[head];
  if (hp.spec.kind == HeadKind::kClassify) {
    const Vec pooled = cache.final.colwise().mean().transpose();
    cache.output = hp.weight.transpose() * pooled + hp.bias;
  } else {
    // Column-major l x lambda storage is exactly the row-major lambda x l flatten.
    const Eigen::Map<const Vec> flat(cache.final.data(), cache.final.size());
    cache.output = hp.weight.transpose() * flat + hp.bias;
  }
  if (!cache.output.allFinite()) throw NumericError("model: non-finite output");
  return cache;
}

void model_backward(const ForwardCache& cache, const ModelParams& params, const Vec& upstream,
                    ModelParams& grads) {
  if (cache.params != &params) throw CacheMismatchError("model_backward: cache built from other parameters");
  if (cache.head < 0 || cache.head >= static_cast<int>(params.heads.size()) ||
      cache.layers.size() != params.layers.size())
    throw CacheMismatchError("model_backward: cache does not match model structure");
  const HeadParams& hp = params.heads[cache.head];
  if (upstream.size() != hp.bias.size()) throw CacheMismatchError("model_backward: upstream size mismatch");
  if (grads.layers.size() != params.layers.size() || grads.heads.size() != params.heads.size())
    throw ShapeError("model_backward: gradient container shape mismatch");

  const Eigen::Index l = cache.final.rows(), lambda = cache.final.cols();
  HeadParams& gh = grads.heads[cache.head];
  gh.bias += upstream;
  Mat dz(l, lambda);
  if (hp.spec.kind == HeadKind::kClassify) {
    const Vec pooled = cache.final.colwise().mean().transpose();
    gh.weight.noalias() += pooled * upstream.transpose();
    const Vec dpooled = hp.weight * upstream;
    dz = (dpooled.transpose() / static_cast<double>(l)).replicate(l, 1);
  } else {
    const Eigen::Map<const Vec> flat(cache.final.data(), cache.final.size());
    gh.weight.noalias() += flat * upstream.transpose();
    const Vec dflat = hp.weight * upstream;
    dz = Eigen::Map<const Mat>(dflat.data(), l, lambda);
  }

  const int n_heads = params.config.n_heads;
  for (int k = static_cast<int>(params.layers.size()) - 1; k >= 0; --k) {
    const LayerCache& c = cache.layers[k];
    const EncoderLayerParams& p = params.layers[k];
    EncoderLayerParams& g = grads.layers[k];

    // FFN branch: out = mid + gelu(norm2(mid) W1 + b1) W2 + b2.
    g.ffn_out.noalias() += c.act.transpose() * dz;
    g.ffn_out_bias += dz.colwise().sum().transpose();
    Mat dpre = (dz * p.ffn_out.transpose()).cwiseProduct(
        c.pre_act.unaryExpr([](double x) { return gelu_grad(x); }));
    g.ffn_in.noalias() += c.normed2.transpose() * dpre;
    g.ffn_in_bias += dpre.colwise().sum().transpose();
    const Mat dnormed2 = dpre * p.ffn_in.transpose();
    g.norm2_gain += dnormed2.cwiseProduct(c.xhat2).colwise().sum().transpose();
    g.norm2_bias += dnormed2.colwise().sum().transpose();
    const Mat dxhat2 = dnormed2.array().rowwise() * p.norm2_gain.transpose().array();
    Mat dmid = dz + layer_norm_backward(dxhat2, c.xhat2, c.inv_std2);

    // Attention branch: mid = input + attn(norm1(input)).
    const Eigen::Index dh = p.wq.cols() / n_heads, dv = lambda / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat dq(l, p.wq.cols()), dk(l, p.wk.cols()), dvv(l, lambda);
    for (int h = 0; h < n_heads; ++h) {
      const Mat& prob = c.probs[h];
      const auto d_out = dmid.middleCols(h * dv, dv);
      const Mat dprob = d_out * c.v.middleCols(h * dv, dv).transpose();
      dvv.middleCols(h * dv, dv) = prob.transpose() * d_out;
      Mat ds = prob.cwiseProduct(dprob);
      const Vec row_dot = ds.rowwise().sum();
      ds -= prob.cwiseProduct(row_dot.replicate(1, l));
      ds *= scale;
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    g.wq.noalias() += c.normed1.transpose() * dq;
    g.wk.noalias() += c.normed1.transpose() * dk;
    g.wv.noalias() += c.normed1.transpose() * dvv;
    Mat dnormed1 = dq * p.wq.transpose();
    dnormed1.noalias() += dk * p.wk.transpose();
    dnormed1.noalias() += dvv * p.wv.transpose();
    g.norm1_gain += dnormed1.cwiseProduct(c.xhat1).colwise().sum().transpose();
    g.norm1_bias += dnormed1.colwise().sum().transpose();
    const Mat dxhat1 = dnormed1.array().rowwise() * p.norm1_gain.transpose().array();
    dz = dmid + layer_norm_backward(dxhat1, c.xhat1, c.inv_std1);
  }

  // T^0 = tokens + T_pos; tokens only carry parameters for the ablation embed.
  grads.pos_encoding += dz.transpose();
  if (params.config.tokenizer == TokenizerKind::kWindow) {
    const int width = params.config.window_width, half = width / 2;
    const auto& x = cache.window;
    for (Eigen::Index i = 0; i < lambda; ++i)
      for (int t = 0; t < width; ++t) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < l; ++j) {
          const Eigen::Index src = j + t - half;
          if (src >= 0 && src < l) acc += dz(j, i) * x[src];
        }
        grads.embed(i, t) += acc;
      }
  }
}

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta, const std::string& path) {
  const auto& cfg = params.config;
  binio::Writer w;
  w.magic("WQMD");
  w.u32(kCheckpointVersion);
  w.str(meta.version);
  w.str(meta.wavebook_path);
  w.str(meta.config_json);
  for (int v : {cfg.lambda, cfg.length, cfg.layers, cfg.d_k, cfg.n_heads, cfg.d_ff})
    w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(cfg.tokenizer));
  w.u32(static_cast<std::uint32_t>(cfg.window_width));
  w.u32(static_cast<std::uint32_t>(cfg.heads.size()));
  for (const auto& h : cfg.heads) {
    w.u32(static_cast<std::uint32_t>(h.kind));
    w.u32(static_cast<std::uint32_t>(h.outputs));
  }
  for_each_tensor(params, [&](const char*, const auto& t) {
    // Row-major element order independent of Eigen's storage.
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) w.f64(t(r, c));
  });
  w.save(path);
}

ModelParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  auto r = binio::Reader::open(path);
  r.expect_magic("WQMD");
  r.expect_version(kCheckpointVersion);
  CheckpointMeta m;
  m.version = r.str();
  m.wavebook_path = r.str();
  m.config_json = r.str();
  ModelConfig cfg;
  cfg.lambda = static_cast<int>(r.u32());
  cfg.length = static_cast<int>(r.u32());
  cfg.layers = static_cast<int>(r.u32());
  cfg.d_k = static_cast<int>(r.u32());
  cfg.n_heads = static_cast<int>(r.u32());
  cfg.d_ff = static_cast<int>(r.u32());
  const std::uint32_t tok = r.u32();
  if (tok > 1) r.fail("unknown tokenizer kind");
  cfg.tokenizer = static_cast<TokenizerKind>(tok);
  cfg.window_width = static_cast<int>(r.u32());
  const std::uint32_t n_heads = r.u32();
  if (n_heads > 64) r.fail("implausible head count");
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    const std::uint32_t kind = r.u32();
    if (kind > 2) r.fail("unknown head kind");
    const auto outputs = static_cast<int>(r.u32());
    cfg.heads.push_back({static_cast<HeadKind>(kind), outputs});
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid hyperparameters: ") + e.what());
  }
  ModelParams p = init_params(cfg, 0);
  for_each_tensor(p, [&](const char*, auto& t) {
    for (Eigen::Index row = 0; row < t.rows(); ++row)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(row, c) = r.f64();
  });
  r.expect_end();
  if (meta) *meta = std::move(m);
  return p;
}

}  // namespace wq4ts
