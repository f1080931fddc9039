#include "rawmix/descriptors/rawmixer.hpp"

#include "rawmix/error.hpp"
#include "rawmix/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rawmix {
namespace {

using ad::Tensor;

Tensor uniform(std::mt19937_64& rng, ad::Shape shape, int fan_in)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> v(ad::shape_numel(shape));
    for (double& x : v)
        x = u(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor ones(int n) { return Tensor::full({n}, 1.0, true); }
Tensor zeros(int n) { return Tensor::zeros({n}, true); }

} // namespace

void RawMixerConfig::validate() const
{
    auto positive = [](int v, const char* name) {
        if (v < 1)
            fail(ErrorKind::config, std::string("RawMixer ") + name + " must be positive");
    };
    positive(n_kernels, "n_kernels");
    positive(embed_dim, "embed_dim");
    positive(heads, "heads");
    positive(encoder_layers, "encoder_layers");
    positive(ff_mult, "ff_mult");
    positive(mixer_kernel, "mixer_kernel");
    positive(feature_dim, "feature_dim");
    positive(num_classes, "num_classes");
    if (embed_dim % heads != 0)
        fail(ErrorKind::config, "RawMixer heads (" + std::to_string(heads) +
                                    ") must divide embed_dim (" + std::to_string(embed_dim) + ")");
    if (mixer_kernel % 2 == 0)
        fail(ErrorKind::config, "RawMixer mixer_kernel must be odd");
}

nlohmann::json RawMixerConfig::to_json() const
{
    nlohmann::json j = pattern_to_json(pattern);
    j["n_kernels"] = n_kernels;
    j["embed_dim"] = embed_dim;
    j["heads"] = heads;
    j["encoder_layers"] = encoder_layers;
    j["ff_mult"] = ff_mult;
    j["mixer_kernel"] = mixer_kernel;
    j["feature_dim"] = feature_dim;
    j["num_classes"] = num_classes;
    return j;
}

RawMixerConfig RawMixerConfig::from_json(const nlohmann::json& j)
{
    RawMixerConfig c;
    if (j.contains("msfa"))
        c.pattern = pattern_from_json(j);
    c.n_kernels = j.value("n_kernels", c.n_kernels);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.heads = j.value("heads", c.heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.ff_mult = j.value("ff_mult", c.ff_mult);
    c.mixer_kernel = j.value("mixer_kernel", c.mixer_kernel);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.validate();
    return c;
}

Tensor images_to_tensor(std::span<const RawImage> imgs)
{
    if (imgs.empty())
        fail(ErrorKind::data, "empty image batch");
    const int h = imgs[0].height(), w = imgs[0].width();
    std::vector<double> v;
    v.reserve(imgs.size() * h * w);
    for (const RawImage& img : imgs) {
        if (img.height() != h || img.width() != w)
            fail(ErrorKind::structure, "batch images must share one size");
        v.insert(v.end(), img.data().begin(), img.data().end());
    }
    return Tensor::from({static_cast<int>(imgs.size()), 1, h, w}, std::move(v));
}

Tensor raw_conv(ad::Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias,
                int pattern_width)
{
    if (kernels.rank() != 4 || kernels.dim(1) != 1 || kernels.dim(2) != pattern_width ||
        kernels.dim(3) != pattern_width)
        fail(ErrorKind::config, "raw conv kernels " + ad::shape_str(kernels.shape()) +
                                    " must be [K, 1, B, B] with B = " + std::to_string(pattern_width));
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) % pattern_width != 0 ||
        x.dim(3) % pattern_width != 0)
        fail(ErrorKind::structure, "raw conv input " + ad::shape_str(x.shape()) +
                                       " must be [N, 1, m*B, m*B]");
    return ad::strided_conv2d(tape, x, kernels, bias, pattern_width, 0);
}

RawMixer::RawMixer(RawMixerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg))
{
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int b = cfg_.pattern.width();
    const int k = cfg_.n_kernels, d = cfg_.embed_dim, mk = cfg_.mixer_kernel;
    raw_w_ = uniform(rng, {k, 1, b, b}, b * b);
    raw_b_ = uniform(rng, {k}, b * b);
    bn1_g_ = ones(k);
    bn1_b_ = zeros(k);
    dw_w_ = uniform(rng, {k, 1, mk, mk}, mk * mk);
    dw_b_ = uniform(rng, {k}, mk * mk);
    bn2_g_ = ones(k);
    bn2_b_ = zeros(k);
    pw_w_ = uniform(rng, {k, k}, k);
    pw_b_ = uniform(rng, {k}, k);
    embed_w_ = uniform(rng, {d, k}, k);
    embed_b_ = uniform(rng, {d}, k);
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
        EncoderLayer e;
        e.ln1_g = ones(d);
        e.ln1_b = zeros(d);
        e.wq = uniform(rng, {d, d}, d);
        e.bq = uniform(rng, {d}, d);
        e.wk = uniform(rng, {d, d}, d);
        e.bk = uniform(rng, {d}, d);
        e.wv = uniform(rng, {d, d}, d);
        e.bv = uniform(rng, {d}, d);
        e.wo = uniform(rng, {d, d}, d);
        e.bo = uniform(rng, {d}, d);
        e.ln2_g = ones(d);
        e.ln2_b = zeros(d);
        const int f = d * cfg_.ff_mult;
        e.ff1_w = uniform(rng, {f, d}, d);
        e.ff1_b = uniform(rng, {f}, d);
        e.ff2_w = uniform(rng, {d, f}, f);
        e.ff2_b = uniform(rng, {d}, f);
        layers_.push_back(std::move(e));
    }
    fc_w_ = uniform(rng, {cfg_.feature_dim, d}, d);
    fc_b_ = uniform(rng, {cfg_.feature_dim}, d);
    cls_w_ = uniform(rng, {cfg_.num_classes, cfg_.feature_dim}, cfg_.feature_dim);
    cls_b_ = uniform(rng, {cfg_.num_classes}, cfg_.feature_dim);
    bn1_.running_mean = Tensor::zeros({k});
    bn1_.running_var = Tensor::full({k}, 1.0);
    bn2_.running_mean = Tensor::zeros({k});
    bn2_.running_var = Tensor::full({k}, 1.0);
}

std::vector<ad::NamedTensor> RawMixer::named_parameters() const
{
    std::vector<ad::NamedTensor> p{
        {"raw.weight", raw_w_},     {"raw.bias", raw_b_},     {"bn1.gamma", bn1_g_},
        {"bn1.beta", bn1_b_},       {"mix.dw.weight", dw_w_}, {"mix.dw.bias", dw_b_},
        {"bn2.gamma", bn2_g_},      {"bn2.beta", bn2_b_},     {"mix.pw.weight", pw_w_},
        {"mix.pw.bias", pw_b_},     {"embed.weight", embed_w_}, {"embed.bias", embed_b_},
    };
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const EncoderLayer& e = layers_[l];
        const std::string pre = "enc" + std::to_string(l) + ".";
        p.insert(p.end(), {{pre + "ln1.gamma", e.ln1_g}, {pre + "ln1.beta", e.ln1_b},
                           {pre + "attn.q.weight", e.wq}, {pre + "attn.q.bias", e.bq},
                           {pre + "attn.k.weight", e.wk}, {pre + "attn.k.bias", e.bk},
                           {pre + "attn.v.weight", e.wv}, {pre + "attn.v.bias", e.bv},
                           {pre + "attn.o.weight", e.wo}, {pre + "attn.o.bias", e.bo},
                           {pre + "ln2.gamma", e.ln2_g}, {pre + "ln2.beta", e.ln2_b},
                           {pre + "ff1.weight", e.ff1_w}, {pre + "ff1.bias", e.ff1_b},
                           {pre + "ff2.weight", e.ff2_w}, {pre + "ff2.bias", e.ff2_b}});
    }
    p.insert(p.end(), {{"fc.weight", fc_w_}, {"fc.bias", fc_b_}, {"cls.weight", cls_w_},
                       {"cls.bias", cls_b_}});
    return p;
}

std::vector<Tensor> RawMixer::parameters() const
{
    std::vector<Tensor> out;
    for (auto& np : named_parameters())
        out.push_back(np.tensor);
    return out;
}

std::vector<ad::NamedTensor> RawMixer::state() const
{
    auto s = named_parameters();
    s.insert(s.end(), {{"bn1.running_mean", bn1_.running_mean},
                       {"bn1.running_var", bn1_.running_var},
                       {"bn2.running_mean", bn2_.running_mean},
                       {"bn2.running_var", bn2_.running_var}});
    return s;
}

std::size_t RawMixer::parameter_count() const
{
    std::size_t n = 0;
    for (auto& np : named_parameters())
        n += np.tensor.numel();
    return n;
}

std::vector<ad::NamedTensor> RawMixer::snapshot() const
{
    std::vector<ad::NamedTensor> out;
    for (auto& s : state())
        out.push_back({s.name, Tensor::from(s.tensor.shape(), std::vector<double>(s.tensor.value().begin(),
                                                                                  s.tensor.value().end()))});
    return out;
}

void RawMixer::load_state(const std::vector<ad::NamedTensor>& src)
{
    for (auto& dst : state()) {
        auto it = std::find_if(src.begin(), src.end(), [&](const ad::NamedTensor& t) { return t.name == dst.name; });
        if (it == src.end())
            fail(ErrorKind::structure, "state is missing tensor '" + dst.name + "'");
        if (it->tensor.shape() != dst.tensor.shape())
            fail(ErrorKind::structure, "tensor '" + dst.name + "' has shape " +
                                           ad::shape_str(it->tensor.shape()) + ", model expects " +
                                           ad::shape_str(dst.tensor.shape()));
        Tensor t = dst.tensor;
        std::copy(it->tensor.value().begin(), it->tensor.value().end(), t.value().begin());
    }
}

Tensor RawMixer::encoder_layer(ad::Tape& tape, const EncoderLayer& e, const Tensor& x) const
{
    const int n = x.dim(0), t = x.dim(1), d = x.dim(2);
    const int heads = cfg_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d / heads));

    Tensor h = ad::layer_norm(tape, x, e.ln1_g, e.ln1_b);
    Tensor q = ad::split_heads(tape, ad::linear(tape, h, e.wq, e.bq), heads);
    Tensor k = ad::split_heads(tape, ad::linear(tape, h, e.wk, e.bk), heads);
    Tensor v = ad::split_heads(tape, ad::linear(tape, h, e.wv, e.bv), heads);
    Tensor scores = ad::scale(tape, ad::batched_matmul(tape, q, k, true), inv_sqrt);
    Tensor attn = ad::softmax(tape, scores);
    Tensor ctx = ad::merge_heads(tape, ad::batched_matmul(tape, attn, v, false), heads);
    Tensor x1 = ad::add(tape, x, ad::linear(tape, ctx, e.wo, e.bo));

    Tensor h2 = ad::layer_norm(tape, x1, e.ln2_g, e.ln2_b);
    Tensor ff = ad::linear(tape, ad::selu(tape, ad::linear(tape, h2, e.ff1_w, e.ff1_b)), e.ff2_w, e.ff2_b);
    Tensor out = ad::add(tape, x1, ff);
    (void)n;
    (void)t;
    return out;
}

RawMixerOutput RawMixer::forward(ad::Tape& tape, const Tensor& x, Mode mode)
{
    const int b = cfg_.pattern.width();
    if (x.rank() != 4 || x.dim(2) < 2 * b || x.dim(3) < 2 * b)
        fail(ErrorKind::size, "RawMixer input " + ad::shape_str(x.shape()) +
                                  " needs at least 2 basic patterns per axis");
    const bool training = mode == Mode::train;

    Tensor f = raw_conv(tape, x, raw_w_, raw_b_, b);
    Tensor pre = ad::batch_norm(tape, ad::selu(tape, f), bn1_g_, bn1_b_, bn1_, training);
    Tensor mixed = ad::depthwise_conv2d(tape, pre, dw_w_, dw_b_, cfg_.mixer_kernel / 2);
    mixed = ad::batch_norm(tape, ad::selu(tape, mixed), bn2_g_, bn2_b_, bn2_, training);
    mixed = ad::pointwise_conv2d(tape, mixed, pw_w_, pw_b_);
    Tensor pooled = ad::maxpool2x2(tape, ad::add(tape, mixed, pre));

    Tensor tokens = ad::linear(tape, ad::to_tokens(tape, pooled), embed_w_, embed_b_);
    for (const EncoderLayer& e : layers_)
        tokens = encoder_layer(tape, e, tokens);
    Tensor pooled_tokens = ad::mean_axis(tape, tokens, 1);
    Tensor features = ad::selu(tape, ad::linear(tape, pooled_tokens, fc_w_, fc_b_));
    Tensor logits = ad::linear(tape, features, cls_w_, cls_b_);
    return {features, logits};
}

RawMixerOutput RawMixer::forward(ad::Tape& tape, std::span<const RawImage> batch, Mode mode)
{
    for (const RawImage& img : batch)
        if (!(img.pattern() == cfg_.pattern))
            fail(ErrorKind::config, "image MSFA '" + img.pattern().id() +
                                        "' does not match the model's '" + cfg_.pattern.id() + "'");
    return forward(tape, images_to_tensor(batch), mode);
}

std::vector<std::vector<double>> RawMixer::extract(std::span<const RawImage> imgs, int batch_size)
{
    std::vector<std::vector<double>> out;
    out.reserve(imgs.size());
    const int fd = cfg_.feature_dim;
    for (std::size_t s = 0; s < imgs.size(); s += batch_size) {
        const std::size_t e = std::min(imgs.size(), s + static_cast<std::size_t>(batch_size));
        ad::Tape tape(false);
        RawMixerOutput o = forward(tape, imgs.subspan(s, e - s), Mode::eval);
        for (std::size_t i = 0; i < e - s; ++i)
            out.emplace_back(o.features.value().begin() + i * fd,
                             o.features.value().begin() + (i + 1) * fd);
    }
    return out;
}

void RawMixer::save(const std::filesystem::path& path) const
{
    ad::save_checkpoint(path, {{"model", "rawmixer"}, {"config", cfg_.to_json()}}, state());
}

RawMixer RawMixer::load(const std::filesystem::path& path)
{
    ad::Checkpoint ck = ad::load_checkpoint(path);
    if (ck.meta.value("model", "") != "rawmixer")
        fail(ErrorKind::data, "'" + path.string() + "' is not a RawMixer checkpoint");
    RawMixer model(RawMixerConfig::from_json(ck.meta.at("config")), 0);
    model.load_state(ck.tensors);
    return model;
}

std::vector<double> RawMixerDescriptor::extract(const RawImage& img) const
{
    return model_->extract(std::span<const RawImage>(&img, 1)).front();
}

std::vector<std::vector<double>> RawMixerDescriptor::extract_batch(std::span<const RawImage> imgs) const
{
    return model_->extract(imgs);
}

} // namespace rawmix
