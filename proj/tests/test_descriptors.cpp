#include "gradcheck.hpp"
#include "oracles.hpp"

#include "rawmix/constancy.hpp"
#include "rawmix/descriptors/mlbp.hpp"
#include "rawmix/descriptors/rawmixer.hpp"
#include "rawmix/error.hpp"
#include "rawmix/radiance.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>

using namespace rawmix;
using ad::Tape;
using ad::Tensor;

namespace {

RawMixerConfig tiny(const MsfaPattern& p, int classes = 3)
{
    RawMixerConfig c;
    c.pattern = p;
    c.n_kernels = 8;
    c.embed_dim = 8;
    c.heads = 2;
    c.ff_mult = 2;
    c.feature_dim = 4;
    c.num_classes = classes;
    return c;
}

std::map<std::string, Tensor> state_map(const RawMixer& m)
{
    std::map<std::string, Tensor> out;
    for (auto& nt : m.state())
        out.emplace(nt.name, nt.tensor);
    return out;
}

double norm(std::span<const double> v)
{
    double s = 0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

} // namespace

TEST(RawConv, OnesKernelSumsBasicPatch)
{
    std::mt19937_64 rng(1);
    const MsfaPattern p = MsfaPattern::imec4x4();
    RawImage img = oracle::random_raw(p, 3, 3, rng);
    Tape tape(false);
    Tensor f = raw_conv(tape, images_to_tensor(std::span(&img, 1)), Tensor::full({1, 1, 4, 4}, 1.0), Tensor(), 4);
    ASSERT_EQ(f.shape(), (ad::Shape{1, 1, 3, 3}));
    for (int cy = 0; cy < 3; ++cy)
        for (int cx = 0; cx < 3; ++cx) {
            double s = 0;
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < 4; ++i)
                    s += img.at(cx * 4 + i, cy * 4 + j);
            EXPECT_NEAR(f.value()[cy * 3 + cx], s, 1e-14);
        }
}

TEST(RawConv, IndicatorKernelSamplesOneBand)
{
    std::mt19937_64 rng(2);
    const MsfaPattern p = MsfaPattern::imec5x5();
    RawImage img = oracle::random_raw(p, 4, 3, rng);
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) {
            Tensor h = Tensor::zeros({1, 1, 5, 5});
            h.value()[j * 5 + i] = 1.0;
            Tape tape(false);
            Tensor f = raw_conv(tape, images_to_tensor(std::span(&img, 1)), h, Tensor(), 5);
            const int band = oracle::band_of(p, i, j);
            for (int cy = 0; cy < 4; ++cy)
                for (int cx = 0; cx < 3; ++cx)
                    EXPECT_EQ(f.value()[cy * 3 + cx], oracle::cell_band_value(img, cx, cy, band));
        }
}

TEST(RawConv, EqualsUnshufflePlusPointwiseForAllPatterns)
{
    std::mt19937_64 rng(3);
    for (const auto& id : MsfaPattern::builtin_ids()) {
        const MsfaPattern p = MsfaPattern::by_id(id);
        const int b = p.width();
        for (int trial = 0; trial < 5; ++trial) {
            RawImage img = oracle::random_raw(p, 3, 3, rng);
            Tensor h = Tensor::from({6, 1, b, b}, oracle::random_vec(6 * b * b, rng));
            Tensor bias = Tensor::from({6}, oracle::random_vec(6, rng));
            Tape tape(false);
            Tensor f = raw_conv(tape, images_to_tensor(std::span(&img, 1)), h, bias, b);

            // Each kernel flattened to a B^2 vector indexed by band.
            const PlaneCube cube = pixel_unshuffle(img);
            for (int n = 0; n < 6; ++n) {
                std::vector<double> by_band(p.band_count());
                for (int j = 0; j < b; ++j)
                    for (int i = 0; i < b; ++i)
                        by_band[oracle::band_of(p, i, j)] = h.value()[(n * b + j) * b + i];
                for (int cy = 0; cy < 3; ++cy)
                    for (int cx = 0; cx < 3; ++cx) {
                        double s = bias.value()[n];
                        for (int band = 0; band < p.band_count(); ++band)
                            s += by_band[band] * cube.at(band, cx, cy);
                        EXPECT_NEAR(f.value()[(n * 3 + cy) * 3 + cx], s, 1e-12) << id;
                    }
            }
        }
    }
}

TEST(RawConv, BandPerturbationMovesOnlyItsCell)
{
    std::mt19937_64 rng(4);
    const MsfaPattern p = MsfaPattern::imec4x4();
    RawImage img = oracle::random_raw(p, 3, 3, rng);
    Tensor h = Tensor::from({3, 1, 4, 4}, oracle::random_vec(48, rng));
    Tape tape(false);
    Tensor before = raw_conv(tape, images_to_tensor(std::span(&img, 1)), h, Tensor(), 4);
    const int x0 = 6, y0 = 9; // cell (1, 2), offset (2, 1)
    const double delta = 0.37;
    img.at(x0, y0) += delta;
    Tensor after = raw_conv(tape, images_to_tensor(std::span(&img, 1)), h, Tensor(), 4);
    for (int n = 0; n < 3; ++n)
        for (int cy = 0; cy < 3; ++cy)
            for (int cx = 0; cx < 3; ++cx) {
                const std::size_t k = (n * 3 + cy) * 3 + cx;
                const double expect = (cx == 1 && cy == 2) ? h.value()[(n * 4 + 1) * 4 + 2] * delta : 0.0;
                EXPECT_NEAR(after.value()[k] - before.value()[k], expect, 1e-12);
            }
}

TEST(RawConv, WrongKernelSizeIsConfigError)
{
    Tape tape(false);
    try {
        raw_conv(tape, Tensor::zeros({1, 1, 10, 10}), Tensor::zeros({2, 1, 3, 3}), Tensor(), 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(RawMixerModel, DefaultsAndParameterCount)
{
    RawMixerConfig c;
    EXPECT_EQ(c.n_kernels, 320);
    EXPECT_EQ(c.embed_dim, 384);
    EXPECT_EQ(c.feature_dim, 128);
    EXPECT_EQ(c.embed_dim % c.heads, 0);
    RawMixer m(c, 0);

    const long k = 320, b2 = 25, d = 384, f = 128, cl = c.num_classes;
    const long expect = (k * b2 + k) + 2 * k + (k * 9 + k) + 2 * k + (k * k + k) + (d * k + d) +
                        (2 * d + 4 * (d * d + d) + 2 * d + (d * 4 * d + 4 * d) + (4 * d * d + d)) +
                        (f * d + f) + (cl * f + cl);
    EXPECT_EQ(static_cast<long>(m.parameter_count()), expect);
}

TEST(RawMixerModel, InvalidConfigRejected)
{
    RawMixerConfig c;
    c.heads = 5;
    EXPECT_THROW(c.validate(), Error);
    c = RawMixerConfig{};
    c.n_kernels = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(RawMixerModel, OutputShapesFor65x65)
{
    RawMixerConfig c = tiny(MsfaPattern::imec5x5());
    c.feature_dim = 128;
    RawMixer m(c, 1);
    std::mt19937_64 rng(5);
    std::vector<RawImage> imgs{oracle::random_raw(c.pattern, 13, 13, rng), oracle::random_raw(c.pattern, 13, 13, rng)};
    Tape tape(false);
    auto out = m.forward(tape, imgs, Mode::eval);
    EXPECT_EQ(out.features.shape(), (ad::Shape{2, 128}));
    EXPECT_EQ(out.logits.shape(), (ad::Shape{2, 3}));

    // 13 cells -> maxpool floor -> 6 x 6 = 36 tokens
    Tape t2(false);
    Tensor pooled = ad::maxpool2x2(t2, Tensor::zeros({1, 1, 13, 13}));
    EXPECT_EQ(ad::to_tokens(t2, pooled).shape(), (ad::Shape{1, 36, 1}));
}

TEST(RawMixerModel, TooSmallInputIsSizeError)
{
    RawMixer m(tiny(MsfaPattern::imec5x5()), 0);
    std::mt19937_64 rng(6);
    std::vector<RawImage> imgs{oracle::random_raw(m.config().pattern, 1, 3, rng)};
    Tape tape(false);
    try {
        m.forward(tape, imgs, Mode::eval);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::size);
    }
}

TEST(RawMixerModel, WrongPatternIsConfigError)
{
    RawMixer m(tiny(MsfaPattern::imec5x5()), 0);
    std::mt19937_64 rng(6);
    std::vector<RawImage> imgs{oracle::random_raw(MsfaPattern::imec4x4(), 4, 4, rng)};
    Tape tape(false);
    EXPECT_THROW(m.forward(tape, imgs, Mode::eval), Error);
}

TEST(RawMixerModel, EvalIsDeterministicAndBatchIndependent)
{
    RawMixer m(tiny(MsfaPattern::imec4x4()), 2);
    std::mt19937_64 rng(7);
    std::vector<RawImage> imgs;
    for (int i = 0; i < 5; ++i)
        imgs.push_back(oracle::random_raw(m.config().pattern, 4, 4, rng));
    const auto all = m.extract(imgs, 5);
    const auto again = m.extract(imgs, 2);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const auto alone = m.extract(std::span(&imgs[i], 1));
        EXPECT_LT(oracle::max_abs_diff(alone[0], all[i]), 1e-12);
        EXPECT_EQ(all[i], again[i]);
    }
}

TEST(RawMixerModel, IdenticalTokensMatchSingleTokenPath)
{
    const MsfaPattern p = MsfaPattern::imec2x2();
    RawMixer m(tiny(p), 3);
    // Centre-only depthwise taps make the mixing block padding-free, so a
    // periodic image yields identical tokens everywhere.
    auto st = state_map(m);
    auto dw = st.at("mix.dw.weight").value();
    for (std::size_t c = 0; c < dw.size() / 9; ++c)
        for (int t = 0; t < 9; ++t)
            if (t != 4)
                dw[c * 9 + t] = 0.0;
    std::mt19937_64 rng(8);
    const auto vals = oracle::random_vec(4, rng, 0.1, 0.9);
    RawImage small = tile_band_values(p, 4, 4, vals);   // m = 2, one token
    RawImage large = tile_band_values(p, 16, 16, vals); // m = 8, 16 tokens
    const auto a = m.extract(std::span(&small, 1));
    const auto b = m.extract(std::span(&large, 1));
    EXPECT_LT(oracle::max_abs_diff(a[0], b[0]), 1e-12);
}

namespace {

double selu(double v)
{
    return v > 0 ? ad::kSeluScale * v : ad::kSeluScale * ad::kSeluAlpha * (std::exp(v) - 1.0);
}

using Mat = std::vector<std::vector<double>>; // [rows][cols]

Mat lin(const Mat& x, std::span<const double> w, std::span<const double> b)
{
    const std::size_t out = b.size(), in = x[0].size();
    Mat y(x.size(), std::vector<double>(out));
    for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t o = 0; o < out; ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < in; ++i)
                s += w[o * in + i] * x[r][i];
            y[r][o] = s;
        }
    return y;
}

Mat lnorm(const Mat& x, std::span<const double> g, std::span<const double> b)
{
    Mat y = x;
    for (auto& row : y) {
        double mu = 0, var = 0;
        for (double v : row)
            mu += v;
        mu /= row.size();
        for (double v : row)
            var += (v - mu) * (v - mu);
        var /= row.size();
        for (std::size_t i = 0; i < row.size(); ++i)
            row[i] = g[i] * (row[i] - mu) / std::sqrt(var + 1e-5) + b[i];
    }
    return y;
}

} // namespace

TEST(RawMixerModel, ForwardMatchesStageByStageOracle)
{
    // 10 x 10 with B = 2: m = 5, pooled 2 x 2 = 4 tokens.
    const MsfaPattern p = MsfaPattern::imec2x2();
    RawMixer m(tiny(p, 2), 11);
    auto st = state_map(m);
    std::mt19937_64 rng(9);
    for (const char* s : {"bn1.running_mean", "bn2.running_mean", "bn1.beta", "bn2.beta", "mix.dw.bias"})
        for (double& v : st.at(s).value())
            v = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    for (const char* s : {"bn1.running_var", "bn2.running_var", "bn1.gamma", "bn2.gamma"})
        for (double& v : st.at(s).value())
            v = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    RawImage img = oracle::random_raw(p, 5, 5, rng);
    auto V = [&](const char* s) { return std::span<const double>(st.at(s).value()); };

    const int K = 8, M = 5;
    // raw conv, SELU, BN (eval)
    std::vector<double> pre(K * M * M), mix(K * M * M);
    for (int k = 0; k < K; ++k)
        for (int y = 0; y < M; ++y)
            for (int x = 0; x < M; ++x) {
                double s = V("raw.bias")[k];
                for (int j = 0; j < 2; ++j)
                    for (int i = 0; i < 2; ++i)
                        s += V("raw.weight")[k * 4 + j * 2 + i] * img.at(2 * x + i, 2 * y + j);
                pre[(k * M + y) * M + x] = V("bn1.gamma")[k] * (selu(s) - V("bn1.running_mean")[k]) /
                                               std::sqrt(V("bn1.running_var")[k] + 1e-5) +
                                           V("bn1.beta")[k];
            }
    // depthwise 3x3 pad 1, SELU, BN
    for (int k = 0; k < K; ++k)
        for (int y = 0; y < M; ++y)
            for (int x = 0; x < M; ++x) {
                double s = V("mix.dw.bias")[k];
                for (int j = -1; j <= 1; ++j)
                    for (int i = -1; i <= 1; ++i)
                        if (y + j >= 0 && y + j < M && x + i >= 0 && x + i < M)
                            s += V("mix.dw.weight")[k * 9 + (j + 1) * 3 + i + 1] * pre[(k * M + y + j) * M + x + i];
                mix[(k * M + y) * M + x] = V("bn2.gamma")[k] * (selu(s) - V("bn2.running_mean")[k]) /
                                               std::sqrt(V("bn2.running_var")[k] + 1e-5) +
                                           V("bn2.beta")[k];
            }
    // pointwise + residual, maxpool, tokens
    std::vector<double> res(K * M * M);
    for (int o = 0; o < K; ++o)
        for (int q = 0; q < M * M; ++q) {
            double s = V("mix.pw.bias")[o];
            for (int k = 0; k < K; ++k)
                s += V("mix.pw.weight")[o * K + k] * mix[k * M * M + q];
            res[o * M * M + q] = s + pre[o * M * M + q];
        }
    Mat tokens(4, std::vector<double>(K));
    for (int ty = 0; ty < 2; ++ty)
        for (int tx = 0; tx < 2; ++tx)
            for (int k = 0; k < K; ++k) {
                double mx = -1e300;
                for (int j = 0; j < 2; ++j)
                    for (int i = 0; i < 2; ++i)
                        mx = std::max(mx, res[(k * M + 2 * ty + j) * M + 2 * tx + i]);
                tokens[ty * 2 + tx][k] = mx;
            }
    Mat x = lin(tokens, V("embed.weight"), V("embed.bias"));
    // encoder layer: 2 heads of width 4
    Mat h = lnorm(x, V("enc0.ln1.gamma"), V("enc0.ln1.beta"));
    Mat q = lin(h, V("enc0.attn.q.weight"), V("enc0.attn.q.bias"));
    Mat kk = lin(h, V("enc0.attn.k.weight"), V("enc0.attn.k.bias"));
    Mat v = lin(h, V("enc0.attn.v.weight"), V("enc0.attn.v.bias"));
    Mat ctx(4, std::vector<double>(8, 0.0));
    for (int head = 0; head < 2; ++head)
        for (int t = 0; t < 4; ++t) {
            std::vector<double> sc(4);
            double mx = -1e300, z = 0;
            for (int u = 0; u < 4; ++u) {
                double s = 0;
                for (int e = 0; e < 4; ++e)
                    s += q[t][head * 4 + e] * kk[u][head * 4 + e];
                sc[u] = s / 2.0;
                mx = std::max(mx, sc[u]);
            }
            for (double& s : sc)
                z += (s = std::exp(s - mx));
            for (int u = 0; u < 4; ++u)
                for (int e = 0; e < 4; ++e)
                    ctx[t][head * 4 + e] += sc[u] / z * v[u][head * 4 + e];
        }
    Mat att = lin(ctx, V("enc0.attn.o.weight"), V("enc0.attn.o.bias"));
    for (int t = 0; t < 4; ++t)
        for (int e = 0; e < 8; ++e)
            x[t][e] += att[t][e];
    Mat ff = lin(lnorm(x, V("enc0.ln2.gamma"), V("enc0.ln2.beta")), V("enc0.ff1.weight"), V("enc0.ff1.bias"));
    for (auto& row : ff)
        for (double& e : row)
            e = selu(e);
    ff = lin(ff, V("enc0.ff2.weight"), V("enc0.ff2.bias"));
    Mat mean(1, std::vector<double>(8, 0.0));
    for (int t = 0; t < 4; ++t)
        for (int e = 0; e < 8; ++e)
            mean[0][e] += (x[t][e] + ff[t][e]) / 4.0;
    Mat feat = lin(mean, V("fc.weight"), V("fc.bias"));
    for (double& e : feat[0])
        e = selu(e);
    Mat logits = lin(feat, V("cls.weight"), V("cls.bias"));

    Tape tape(false);
    auto out = m.forward(tape, std::span(&img, 1), Mode::eval);
    EXPECT_LT(oracle::max_abs_diff(out.features.value(), feat[0]), 1e-10);
    EXPECT_LT(oracle::max_abs_diff(out.logits.value(), logits[0]), 1e-10);
}

TEST(RawMixerModel, FullModelGradientCheck)
{
    const MsfaPattern p = MsfaPattern::imec2x2();
    RawMixer m(tiny(p), 4);
    std::mt19937_64 rng(10);
    std::vector<RawImage> imgs;
    for (int i = 0; i < 3; ++i)
        imgs.push_back(oracle::random_raw(p, 5, 5, rng));
    const std::vector<int> labels{0, 2, 1};
    const Tensor x = images_to_tensor(imgs);
    // Train-mode batch norm normalizes with batch statistics, so the running
    // statistics it updates never feed back into the loss.
    auto loss = [&](Tape& t) {
        return ad::cross_entropy_loss(t, m.forward(t, x, Mode::train).logits, labels);
    };
    std::size_t checked = 0, retried = 0;
    for (auto& np : m.named_parameters()) {
        auto r = gradcheck::check_param(loss, np.tensor, {}, 1e-3, 1e-4, {1e-4, 1e-5, 1e-6});
        EXPECT_LT(r.max_rel, 1e-4) << np.name;
        checked += r.checked;
        retried += r.retried;
    }
    EXPECT_EQ(checked, m.parameter_count());
    EXPECT_LT(retried, checked / 10); // fallbacks stay the exception
}

TEST(RawMixerModel, SaveLoadRoundTrip)
{
    RawMixer m(tiny(MsfaPattern::imec4x4()), 5);
    const auto dir = std::filesystem::temp_directory_path() / "rawmix_tests";
    std::filesystem::create_directories(dir);
    m.save(dir / "model.ckpt");
    RawMixer back = RawMixer::load(dir / "model.ckpt");
    EXPECT_EQ(back.config().to_json(), m.config().to_json());
    std::mt19937_64 rng(11);
    RawImage img = oracle::random_raw(m.config().pattern, 4, 4, rng);
    EXPECT_EQ(m.extract(std::span(&img, 1)), back.extract(std::span(&img, 1)));
}

TEST(RawMixerModel, WhiteBalancedFeaturesAreIlluminantIndependent)
{
    const MsfaPattern p = MsfaPattern::imec5x5();
    auto scenes = synth_textures(p, 2, 30, 3);
    RawMixerConfig c = tiny(p);
    RawMixer m(c, 6);
    for (const auto& scene : scenes) {
        RawImage a = white_balance(render_raw(scene, Illuminant::daylight()));
        RawImage b = white_balance(render_raw(scene, Illuminant::warm()));
        const auto fa = m.extract(std::span(&a, 1))[0], fb = m.extract(std::span(&b, 1))[0];
        EXPECT_LT(oracle::max_abs_diff(fa, fb), 1e-5 * std::max(1.0, norm(fa)));
    }
}

TEST(Mlbp, Dimensions)
{
    EXPECT_EQ(mlbp_dim(MsfaPattern::imec4x4()), 4096);
    EXPECT_EQ(mlbp_dim(MsfaPattern::imec5x5()), 6400);
    EXPECT_EQ(mlbp_dim(MsfaPattern::imec2x2()), 1024);
    std::mt19937_64 rng(12);
    for (const auto& id : MsfaPattern::builtin_ids()) {
        const MsfaPattern p = MsfaPattern::by_id(id);
        const auto f = mlbp(oracle::random_raw(p, 4, 5, rng));
        EXPECT_EQ(static_cast<int>(f.size()), mlbp_dim(p));
        EXPECT_NEAR(std::accumulate(f.begin(), f.end(), 0.0), p.band_count(), 1e-9);
    }
}

TEST(Mlbp, ConstantImageHitsBin255)
{
    const MsfaPattern p = MsfaPattern::imec4x4();
    RawImage img(p, 16, 16);
    std::fill(img.data().begin(), img.data().end(), 0.4);
    const auto f = mlbp(img);
    for (int b = 0; b < 16; ++b)
        for (int bin = 0; bin < 256; ++bin)
            EXPECT_EQ(f[b * 256 + bin], bin == 255 ? 1.0 : 0.0);
}

TEST(Mlbp, MatchesNaiveNeighbourLoops)
{
    const MsfaPattern p = MsfaPattern::imec2x2();
    std::mt19937_64 rng(13);
    RawImage img = oracle::random_raw(p, 10, 10, rng);
    std::vector<double> expect(4 * 256, 0.0);
    std::vector<int> count(4, 0);
    for (int y = 2; y < 18; ++y)
        for (int x = 2; x < 18; ++x) {
            int code = 0;
            for (int k = 0; k < 8; ++k)
                if (img.at(x + 2 * kMlbpOffsets[k][0], y + 2 * kMlbpOffsets[k][1]) >= img.at(x, y))
                    code |= 1 << k;
            const int band = oracle::band_of(p, x, y);
            expect[band * 256 + code] += 1;
            ++count[band];
        }
    for (int b = 0; b < 4; ++b)
        for (int bin = 0; bin < 256; ++bin)
            expect[b * 256 + bin] /= count[b];
    EXPECT_LT(oracle::max_abs_diff(mlbp(img), expect), 1e-15);
}

TEST(Mlbp, TooSmallIsSizeError)
{
    std::mt19937_64 rng(14);
    try {
        mlbp(oracle::random_raw(MsfaPattern::imec2x2(), 2, 5, rng));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::size);
    }
}
