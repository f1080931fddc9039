#include "rawmix/autodiff/ops.hpp"

#include "rawmix/error.hpp"
#include "rawmix/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rawmix::ad {
namespace {

using kernels::Trans;

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b)
{
    fail(ErrorKind::structure, std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                                   " and " + shape_str(b.shape()));
}

void expect_rank(const char* op, const Tensor& t, int rank)
{
    if (t.rank() != rank)
        fail(ErrorKind::structure, std::string(op) + ": expected rank " + std::to_string(rank) +
                                       ", got shape " + shape_str(t.shape()));
}

void accumulate(std::span<double> dst, std::span<const double> src)
{
    kernels::active().axpy(1.0, src.data(), dst.data(), src.size());
}

// [Cin, H, W] image -> [Cin*k*k, Ho*Wo] columns.
void im2col(const double* img, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
            double* cols)
{
    for (int c = 0; c < cin; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? img[(static_cast<std::size_t>(c) * h + iy) * w + ix]
                                                : 0.0;
                    }
                }
            }
}

void col2im(const double* cols, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
            double* img)
{
    for (int c = 0; c < cin; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h)
                        continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w)
                            img[(static_cast<std::size_t>(c) * h + iy) * w + ix] += row[oy * wo + ox];
                    }
                }
            }
}

// (outer, axis, inner) factorization of a shape around `axis`.
struct Split3 {
    std::size_t outer = 1, axis = 1, inner = 1;
};

Split3 split_at(const Shape& s, int axis)
{
    Split3 r;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i < axis)
            r.outer *= s[i];
        else if (i == axis)
            r.axis = s[i];
        else
            r.inner *= s[i];
    }
    return r;
}

} // namespace

Tensor strided_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                      int pad)
{
    expect_rank("strided_conv2d", x, 4);
    expect_rank("strided_conv2d", w, 4);
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin || w.dim(3) != k)
        mismatch("strided_conv2d", x, w);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
        mismatch("strided_conv2d", w, bias);
    if (stride < 1 || pad < 0)
        fail(ErrorKind::config, "strided_conv2d: stride must be >= 1 and pad >= 0");
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (wd + 2 * pad - k) / stride + 1;
    if (ho < 1 || wo < 1)
        fail(ErrorKind::size, "strided_conv2d: kernel larger than padded input " + shape_str(x.shape()));
    const int ckk = cin * k * k;
    const int hw = ho * wo;

    Tensor y = Tensor::zeros({n, cout, ho, wo});
    std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
    for (int i = 0; i < n; ++i) {
        im2col(x.value().data() + static_cast<std::size_t>(i) * cin * h * wd, cin, h, wd, k, stride,
               pad, ho, wo, cols.data());
        double* out = y.value().data() + static_cast<std::size_t>(i) * cout * hw;
        if (bias.defined())
            for (int c = 0; c < cout; ++c)
                std::fill_n(out + static_cast<std::size_t>(c) * hw, hw, bias.value()[c]);
        kernels::gemm(Trans::no, Trans::no, cout, hw, ckk, w.value().data(), ckk, cols.data(), hw,
                      out, hw, true);
    }

    if (tape.needs_grad({&x, &w, &bias})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
            std::vector<double> dcols(static_cast<std::size_t>(ckk) * hw);
            for (int i = 0; i < n; ++i) {
                const double* dy = y.grad().data() + static_cast<std::size_t>(i) * cout * hw;
                if (w.requires_grad()) {
                    im2col(x.value().data() + static_cast<std::size_t>(i) * cin * h * wd, cin, h, wd,
                           k, stride, pad, ho, wo, cols.data());
                    kernels::gemm(Trans::no, Trans::yes, cout, ckk, hw, dy, hw, cols.data(), hw,
                                  w.grad().data(), ckk, true);
                }
                if (bias.defined() && bias.requires_grad())
                    for (int c = 0; c < cout; ++c) {
                        double s = 0.0;
                        for (int p = 0; p < hw; ++p)
                            s += dy[static_cast<std::size_t>(c) * hw + p];
                        bias.grad()[c] += s;
                    }
                if (x.requires_grad()) {
                    kernels::gemm(Trans::yes, Trans::no, ckk, hw, cout, w.value().data(), ckk, dy,
                                  hw, dcols.data(), hw, false);
                    col2im(dcols.data(), cin, h, wd, k, stride, pad, ho, wo,
                           x.grad().data() + static_cast<std::size_t>(i) * cin * h * wd);
                }
            }
        });
    }
    return y;
}

Tensor depthwise_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int pad)
{
    expect_rank("depthwise_conv2d", x, 4);
    expect_rank("depthwise_conv2d", w, 4);
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int k = w.dim(2);
    if (w.dim(0) != c || w.dim(1) != 1 || w.dim(3) != k)
        mismatch("depthwise_conv2d", x, w);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c))
        mismatch("depthwise_conv2d", w, bias);
    const int ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
    if (ho < 1 || wo < 1)
        fail(ErrorKind::size, "depthwise_conv2d: kernel larger than padded input");

    Tensor y = Tensor::zeros({n, c, ho, wo});
    const double* xv = x.value().data();
    const double* wv = w.value().data();
    double* yv = y.value().data();
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xv + (static_cast<std::size_t>(i) * c + ch) * h * wd;
            const double* ker = wv + static_cast<std::size_t>(ch) * k * k;
            double* dst = yv + (static_cast<std::size_t>(i) * c + ch) * ho * wo;
            const double b0 = bias.defined() ? bias.value()[ch] : 0.0;
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double s = b0;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy - pad + ky;
                        if (iy < 0 || iy >= h)
                            continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox - pad + kx;
                            if (ix >= 0 && ix < wd)
                                s += ker[ky * k + kx] * src[iy * wd + ix];
                        }
                    }
                    dst[oy * wo + ox] = s;
                }
        }

    if (tape.needs_grad({&x, &w, &bias})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            const double* xv = x.value().data();
            const double* wv = w.value().data();
            const double* dyv = y.grad().data();
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t in_off = (static_cast<std::size_t>(i) * c + ch) * h * wd;
                    const std::size_t out_off = (static_cast<std::size_t>(i) * c + ch) * ho * wo;
                    const double* ker = wv + static_cast<std::size_t>(ch) * k * k;
                    double* dker = w.requires_grad() ? w.grad().data() + static_cast<std::size_t>(ch) * k * k : nullptr;
                    double* dsrc = x.requires_grad() ? x.grad().data() + in_off : nullptr;
                    double db = 0.0;
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            const double g = dyv[out_off + oy * wo + ox];
                            db += g;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy - pad + ky;
                                if (iy < 0 || iy >= h)
                                    continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox - pad + kx;
                                    if (ix < 0 || ix >= wd)
                                        continue;
                                    if (dker)
                                        dker[ky * k + kx] += g * xv[in_off + iy * wd + ix];
                                    if (dsrc)
                                        dsrc[iy * wd + ix] += g * ker[ky * k + kx];
                                }
                            }
                        }
                    if (bias.defined() && bias.requires_grad())
                        bias.grad()[ch] += db;
                }
        });
    }
    return y;
}

Tensor pointwise_conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias)
{
    expect_rank("pointwise_conv2d", x, 4);
    expect_rank("pointwise_conv2d", w, 2);
    const int n = x.dim(0), cin = x.dim(1), hw = x.dim(2) * x.dim(3);
    const int cout = w.dim(0);
    if (w.dim(1) != cin)
        mismatch("pointwise_conv2d", x, w);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
        mismatch("pointwise_conv2d", w, bias);

    Tensor y = Tensor::zeros({n, cout, x.dim(2), x.dim(3)});
    for (int i = 0; i < n; ++i) {
        double* out = y.value().data() + static_cast<std::size_t>(i) * cout * hw;
        if (bias.defined())
            for (int c = 0; c < cout; ++c)
                std::fill_n(out + static_cast<std::size_t>(c) * hw, hw, bias.value()[c]);
        kernels::gemm(Trans::no, Trans::no, cout, hw, cin, w.value().data(), cin,
                      x.value().data() + static_cast<std::size_t>(i) * cin * hw, hw, out, hw, true);
    }

    if (tape.needs_grad({&x, &w, &bias})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (int i = 0; i < n; ++i) {
                const double* dy = y.grad().data() + static_cast<std::size_t>(i) * cout * hw;
                const double* xi = x.value().data() + static_cast<std::size_t>(i) * cin * hw;
                if (w.requires_grad())
                    kernels::gemm(Trans::no, Trans::yes, cout, cin, hw, dy, hw, xi, hw,
                                  w.grad().data(), cin, true);
                if (bias.defined() && bias.requires_grad())
                    for (int c = 0; c < cout; ++c) {
                        double s = 0.0;
                        for (int p = 0; p < hw; ++p)
                            s += dy[static_cast<std::size_t>(c) * hw + p];
                        bias.grad()[c] += s;
                    }
                if (x.requires_grad())
                    kernels::gemm(Trans::yes, Trans::no, cin, hw, cout, w.value().data(), cin, dy,
                                  hw, x.grad().data() + static_cast<std::size_t>(i) * cin * hw, hw,
                                  true);
            }
        });
    }
    return y;
}

Tensor maxpool2x2(Tape& tape, const Tensor& x)
{
    expect_rank("maxpool2x2", x, 4);
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = h / 2, wo = w / 2;
    if (ho < 1 || wo < 1)
        fail(ErrorKind::size, "maxpool2x2: input " + shape_str(x.shape()) + " smaller than 2x2");
    Tensor y = Tensor::zeros({n, c, ho, wo});
    std::vector<std::size_t> argmax(y.numel());
    const double* xv = x.value().data();
    double* yv = y.value().data();
    std::size_t o = 0;
    for (int p = 0; p < n * c; ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * h * w;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox, ++o) {
                std::size_t best = base + static_cast<std::size_t>(2 * oy) * w + 2 * ox;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = base + static_cast<std::size_t>(2 * oy + dy) * w + 2 * ox + dx;
                        if (xv[idx] > xv[best])
                            best = idx;
                    }
                argmax[o] = best;
                yv[o] = xv[best];
            }
    }
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (std::size_t i = 0; i < argmax.size(); ++i)
                x.grad()[argmax[i]] += y.grad()[i];
        });
    }
    return y;
}

Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training)
{
    if (x.rank() < 2)
        fail(ErrorKind::structure, "batch_norm: input " + shape_str(x.shape()) + " needs rank >= 2");
    const int n = x.dim(0), c = x.dim(1);
    if (gamma.numel() != static_cast<std::size_t>(c))
        mismatch("batch_norm", x, gamma);
    if (beta.numel() != static_cast<std::size_t>(c))
        mismatch("batch_norm", x, beta);
    const std::size_t inner = x.numel() / (static_cast<std::size_t>(n) * c);
    const std::size_t count = static_cast<std::size_t>(n) * inner;
    if (!state.running_mean.defined()) {
        state.running_mean = Tensor::zeros({c});
        state.running_var = Tensor::full({c}, 1.0);
    }

    std::vector<double> mean(c), invstd(c);
    const double* xv = x.value().data();
    if (training) {
        if (count < 2)
            fail(ErrorKind::size, "batch_norm: training needs more than one value per channel");
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = xv + (static_cast<std::size_t>(i) * c + ch) * inner;
                for (std::size_t q = 0; q < inner; ++q)
                    s += p[q];
            }
            const double mu = s / count;
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = xv + (static_cast<std::size_t>(i) * c + ch) * inner;
                for (std::size_t q = 0; q < inner; ++q)
                    v += (p[q] - mu) * (p[q] - mu);
            }
            const double var = v / count;
            mean[ch] = mu;
            invstd[ch] = 1.0 / std::sqrt(var + state.eps);
            double& rm = state.running_mean.value()[ch];
            double& rv = state.running_var.value()[ch];
            rm = (1.0 - state.momentum) * rm + state.momentum * mu;
            rv = (1.0 - state.momentum) * rv + state.momentum * (v / (count - 1));
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean.value()[ch];
            invstd[ch] = 1.0 / std::sqrt(state.running_var.value()[ch] + state.eps);
        }
    }

    Tensor y = Tensor::zeros(x.shape());
    std::vector<double> xhat(x.numel());
    double* yv = y.value().data();
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * inner;
            const double g = gamma.value()[ch], b = beta.value()[ch];
            for (std::size_t q = 0; q < inner; ++q) {
                const double h = (xv[off + q] - mean[ch]) * invstd[ch];
                xhat[off + q] = h;
                yv[off + q] = g * h + b;
            }
        }

    if (tape.needs_grad({&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        tape.record(y, [=, xhat = std::move(xhat)]() mutable {
            const double* dy = y.grad().data();
            for (int ch = 0; ch < c; ++ch) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int i = 0; i < n; ++i) {
                    const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * inner;
                    for (std::size_t q = 0; q < inner; ++q) {
                        sum_dy += dy[off + q];
                        sum_dy_xhat += dy[off + q] * xhat[off + q];
                    }
                }
                if (gamma.requires_grad())
                    gamma.grad()[ch] += sum_dy_xhat;
                if (beta.requires_grad())
                    beta.grad()[ch] += sum_dy;
                if (!x.requires_grad())
                    continue;
                const double g = gamma.value()[ch] * invstd[ch];
                const double mdy = sum_dy / count, mdyx = sum_dy_xhat / count;
                for (int i = 0; i < n; ++i) {
                    const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * inner;
                    for (std::size_t q = 0; q < inner; ++q) {
                        if (training)
                            x.grad()[off + q] += g * (dy[off + q] - mdy - xhat[off + q] * mdyx);
                        else
                            x.grad()[off + q] += g * dy[off + q];
                    }
                }
            }
        });
    }
    return y;
}

Tensor selu(Tape& tape, const Tensor& x)
{
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.value().data();
    double* yv = y.value().data();
    for (std::size_t i = 0; i < x.numel(); ++i)
        yv[i] = xv[i] > 0.0 ? kSeluScale * xv[i] : kSeluScale * kSeluAlpha * std::expm1(xv[i]);
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            const double* xv = x.value().data();
            const double* yv = y.value().data();
            const double* dy = y.grad().data();
            double* dx = x.grad().data();
            for (std::size_t i = 0; i < x.numel(); ++i)
                dx[i] += dy[i] * (xv[i] > 0.0 ? kSeluScale : yv[i] + kSeluScale * kSeluAlpha);
        });
    }
    return y;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape())
        mismatch("add", a, b);
    Tensor y = Tensor::from(a.shape(), std::vector<double>(a.value().begin(), a.value().end()));
    accumulate(y.value(), b.value());
    if (tape.needs_grad({&a, &b})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            if (a.requires_grad())
                accumulate(a.grad(), y.grad());
            if (b.requires_grad())
                accumulate(b.grad(), y.grad());
        });
    }
    return y;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape())
        mismatch("mul", a, b);
    Tensor y = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i)
        y.value()[i] = a.value()[i] * b.value()[i];
    if (tape.needs_grad({&a, &b})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (std::size_t i = 0; i < y.numel(); ++i) {
                if (a.requires_grad())
                    a.grad()[i] += y.grad()[i] * b.value()[i];
                if (b.requires_grad())
                    b.grad()[i] += y.grad()[i] * a.value()[i];
            }
        });
    }
    return y;
}

Tensor scale(Tape& tape, const Tensor& x, double s)
{
    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i)
        y.value()[i] = s * x.value()[i];
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            kernels::active().axpy(s, y.grad().data(), x.grad().data(), x.numel());
        });
    }
    return y;
}

Tensor sum(Tape& tape, const Tensor& x)
{
    double s = 0.0;
    for (double v : x.value())
        s += v;
    Tensor y = Tensor::scalar(s);
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            const double g = y.grad()[0];
            for (double& d : x.grad())
                d += g;
        });
    }
    return y;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b)
{
    expect_rank("matmul", a, 2);
    expect_rank("matmul", b, 2);
    if (a.dim(1) != b.dim(0))
        mismatch("matmul", a, b);
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor y = Tensor::zeros({m, n});
    kernels::gemm(Trans::no, Trans::no, m, n, k, a.value().data(), k, b.value().data(), n,
                  y.value().data(), n, false);
    if (tape.needs_grad({&a, &b})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            if (a.requires_grad())
                kernels::gemm(Trans::no, Trans::yes, m, k, n, y.grad().data(), n, b.value().data(),
                              n, a.grad().data(), k, true);
            if (b.requires_grad())
                kernels::gemm(Trans::yes, Trans::no, k, n, m, a.value().data(), k, y.grad().data(),
                              n, b.grad().data(), n, true);
        });
    }
    return y;
}

Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b)
{
    expect_rank("batched_matmul", a, 3);
    expect_rank("batched_matmul", b, 3);
    const int g = a.dim(0), m = a.dim(1), k = a.dim(2);
    const int n = transpose_b ? b.dim(1) : b.dim(2);
    const int bk = transpose_b ? b.dim(2) : b.dim(1);
    if (b.dim(0) != g || bk != k)
        mismatch("batched_matmul", a, b);
    const std::size_t sa = static_cast<std::size_t>(m) * k, sb = static_cast<std::size_t>(k) * n,
                      sy = static_cast<std::size_t>(m) * n;
    const int ldb = transpose_b ? k : n;
    Tensor y = Tensor::zeros({g, m, n});
    for (int i = 0; i < g; ++i)
        kernels::gemm(Trans::no, transpose_b ? Trans::yes : Trans::no, m, n, k,
                      a.value().data() + i * sa, k, b.value().data() + i * sb, ldb,
                      y.value().data() + i * sy, n, false);
    if (tape.needs_grad({&a, &b})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (int i = 0; i < g; ++i) {
                const double* dy = y.grad().data() + i * sy;
                const double* bv = b.value().data() + i * sb;
                const double* av = a.value().data() + i * sa;
                if (a.requires_grad()) // dA = dY * op(B)^T
                    kernels::gemm(Trans::no, transpose_b ? Trans::no : Trans::yes, m, k, n, dy, n,
                                  bv, ldb, a.grad().data() + i * sa, k, true);
                if (b.requires_grad()) {
                    if (transpose_b) // dB[n,k] = dY^T * A
                        kernels::gemm(Trans::yes, Trans::no, n, k, m, dy, n, av, k,
                                      b.grad().data() + i * sb, k, true);
                    else // dB[k,n] = A^T * dY
                        kernels::gemm(Trans::yes, Trans::no, k, n, m, av, k, dy, n,
                                      b.grad().data() + i * sb, n, true);
                }
            }
        });
    }
    return y;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias)
{
    expect_rank("linear", w, 2);
    const int in = w.dim(1), out = w.dim(0);
    if (x.rank() < 1 || x.dim(-1) != in)
        mismatch("linear", x, w);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out))
        mismatch("linear", w, bias);
    const int rows = static_cast<int>(x.numel() / in);
    Shape shape = x.shape();
    shape.back() = out;
    Tensor y = Tensor::zeros(shape);
    double* yv = y.value().data();
    if (bias.defined())
        for (int r = 0; r < rows; ++r)
            std::copy_n(bias.value().data(), out, yv + static_cast<std::size_t>(r) * out);
    kernels::gemm(Trans::no, Trans::yes, rows, out, in, x.value().data(), in, w.value().data(), in,
                  yv, out, true);
    if (tape.needs_grad({&x, &w, &bias})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            const double* dy = y.grad().data();
            if (x.requires_grad())
                kernels::gemm(Trans::no, Trans::no, rows, in, out, dy, out, w.value().data(), in,
                              x.grad().data(), in, true);
            if (w.requires_grad())
                kernels::gemm(Trans::yes, Trans::no, out, in, rows, dy, out, x.value().data(), in,
                              w.grad().data(), in, true);
            if (bias.defined() && bias.requires_grad())
                for (int r = 0; r < rows; ++r)
                    accumulate(bias.grad(), std::span<const double>(dy + static_cast<std::size_t>(r) * out, out));
        });
    }
    return y;
}

Tensor softmax(Tape& tape, const Tensor& x)
{
    const int d = x.dim(-1);
    const std::size_t rows = x.numel() / d;
    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.value().data() + r * d;
        double* yr = y.value().data() + r * d;
        const double mx = *std::max_element(xr, xr + d);
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        for (int j = 0; j < d; ++j)
            yr[j] /= s;
    }
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = y.value().data() + r * d;
                const double* dy = y.grad().data() + r * d;
                double* dx = x.grad().data() + r * d;
                double dot = 0.0;
                for (int j = 0; j < d; ++j)
                    dot += dy[j] * yr[j];
                for (int j = 0; j < d; ++j)
                    dx[j] += yr[j] * (dy[j] - dot);
            }
        });
    }
    return y;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps)
{
    const int d = x.dim(-1);
    if (gamma.numel() != static_cast<std::size_t>(d))
        mismatch("layer_norm", x, gamma);
    if (beta.numel() != static_cast<std::size_t>(d))
        mismatch("layer_norm", x, beta);
    const std::size_t rows = x.numel() / d;
    Tensor y = Tensor::zeros(x.shape());
    std::vector<double> xhat(x.numel()), invstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.value().data() + r * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j)
            mu += xr[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j)
            var += (xr[j] - mu) * (xr[j] - mu);
        var /= d;
        invstd[r] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) {
            const double h = (xr[j] - mu) * invstd[r];
            xhat[r * d + j] = h;
            y.value()[r * d + j] = gamma.value()[j] * h + beta.value()[j];
        }
    }
    if (tape.needs_grad({&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        tape.record(y, [=, xhat = std::move(xhat), invstd = std::move(invstd)]() mutable {
            std::vector<double> g(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dy = y.grad().data() + r * d;
                const double* h = xhat.data() + r * d;
                double mg = 0.0, mgh = 0.0;
                for (int j = 0; j < d; ++j) {
                    g[j] = dy[j] * gamma.value()[j];
                    mg += g[j];
                    mgh += g[j] * h[j];
                    if (gamma.requires_grad())
                        gamma.grad()[j] += dy[j] * h[j];
                    if (beta.requires_grad())
                        beta.grad()[j] += dy[j];
                }
                if (!x.requires_grad())
                    continue;
                mg /= d;
                mgh /= d;
                double* dx = x.grad().data() + r * d;
                for (int j = 0; j < d; ++j)
                    dx[j] += invstd[r] * (g[j] - mg - h[j] * mgh);
            }
        });
    }
    return y;
}

Tensor mean_axis(Tape& tape, const Tensor& x, int axis)
{
    if (axis < 0)
        axis += x.rank();
    if (axis < 0 || axis >= x.rank())
        fail(ErrorKind::structure, "mean_axis: axis out of range for " + shape_str(x.shape()));
    const Split3 s = split_at(x.shape(), axis);
    Shape shape = x.shape();
    shape.erase(shape.begin() + axis);
    if (shape.empty())
        shape.push_back(1);
    Tensor y = Tensor::zeros(shape);
    const double inv = 1.0 / static_cast<double>(s.axis);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t a = 0; a < s.axis; ++a)
            for (std::size_t i = 0; i < s.inner; ++i)
                y.value()[o * s.inner + i] += x.value()[(o * s.axis + a) * s.inner + i] * inv;
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t a = 0; a < s.axis; ++a)
                    for (std::size_t i = 0; i < s.inner; ++i)
                        x.grad()[(o * s.axis + a) * s.inner + i] += y.grad()[o * s.inner + i] * inv;
        });
    }
    return y;
}

Tensor cross_entropy_loss(Tape& tape, const Tensor& logits, std::span<const int> labels)
{
    expect_rank("cross_entropy_loss", logits, 2);
    const int n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        fail(ErrorKind::structure, "cross_entropy_loss: " + std::to_string(labels.size()) +
                                       " labels for logits " + shape_str(logits.shape()));
    std::vector<double> prob(logits.numel());
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            fail(ErrorKind::data, "cross_entropy_loss: label " + std::to_string(labels[i]) +
                                      " outside [0, " + std::to_string(c) + ")");
        const double* z = logits.value().data() + static_cast<std::size_t>(i) * c;
        const double mx = *std::max_element(z, z + c);
        double s = 0.0;
        for (int j = 0; j < c; ++j)
            s += std::exp(z[j] - mx);
        const double lse = mx + std::log(s);
        loss += lse - z[labels[i]];
        for (int j = 0; j < c; ++j)
            prob[static_cast<std::size_t>(i) * c + j] = std::exp(z[j] - lse);
    }
    Tensor y = Tensor::scalar(loss / n);
    if (tape.needs_grad({&logits})) {
        y.set_requires_grad(true);
        std::vector<int> lab(labels.begin(), labels.end());
        tape.record(y, [=, prob = std::move(prob), lab = std::move(lab)]() mutable {
            const double g = y.grad()[0] / n;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j) {
                    const std::size_t q = static_cast<std::size_t>(i) * c + j;
                    logits.grad()[q] += g * (prob[q] - (j == lab[i] ? 1.0 : 0.0));
                }
        });
    }
    return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape)
{
    if (shape_numel(shape) != x.numel())
        fail(ErrorKind::structure, "reshape: cannot view " + shape_str(x.shape()) + " as " +
                                       shape_str(shape));
    Tensor y = Tensor::from(std::move(shape), std::vector<double>(x.value().begin(), x.value().end()));
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable { accumulate(x.grad(), y.grad()); });
    }
    return y;
}

Tensor to_tokens(Tape& tape, const Tensor& x)
{
    expect_rank("to_tokens", x, 4);
    const int n = x.dim(0), c = x.dim(1), t = x.dim(2) * x.dim(3);
    Tensor y = Tensor::zeros({n, t, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int p = 0; p < t; ++p)
                y.value()[(static_cast<std::size_t>(i) * t + p) * c + ch] =
                    x.value()[(static_cast<std::size_t>(i) * c + ch) * t + p];
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch)
                    for (int p = 0; p < t; ++p)
                        x.grad()[(static_cast<std::size_t>(i) * c + ch) * t + p] +=
                            y.grad()[(static_cast<std::size_t>(i) * t + p) * c + ch];
        });
    }
    return y;
}

Tensor split_heads(Tape& tape, const Tensor& x, int heads)
{
    expect_rank("split_heads", x, 3);
    const int n = x.dim(0), t = x.dim(1), dm = x.dim(2);
    if (heads < 1 || dm % heads != 0)
        fail(ErrorKind::config, "split_heads: " + std::to_string(heads) +
                                    " heads do not divide width " + std::to_string(dm));
    const int d = dm / heads;
    Tensor y = Tensor::zeros({n * heads, t, d});
    auto src = [=](int i, int h, int p, int j) { return (static_cast<std::size_t>(i) * t + p) * dm + h * d + j; };
    auto dst = [=](int i, int h, int p, int j) { return ((static_cast<std::size_t>(i) * heads + h) * t + p) * d + j; };
    for (int i = 0; i < n; ++i)
        for (int h = 0; h < heads; ++h)
            for (int p = 0; p < t; ++p)
                for (int j = 0; j < d; ++j)
                    y.value()[dst(i, h, p, j)] = x.value()[src(i, h, p, j)];
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (int i = 0; i < n; ++i)
                for (int h = 0; h < heads; ++h)
                    for (int p = 0; p < t; ++p)
                        for (int j = 0; j < d; ++j)
                            x.grad()[src(i, h, p, j)] += y.grad()[dst(i, h, p, j)];
        });
    }
    return y;
}

Tensor merge_heads(Tape& tape, const Tensor& x, int heads)
{
    expect_rank("merge_heads", x, 3);
    if (heads < 1 || x.dim(0) % heads != 0)
        fail(ErrorKind::config, "merge_heads: batch " + std::to_string(x.dim(0)) +
                                    " is not a multiple of " + std::to_string(heads) + " heads");
    const int n = x.dim(0) / heads, t = x.dim(1), d = x.dim(2), dm = d * heads;
    Tensor y = Tensor::zeros({n, t, dm});
    auto src = [=](int i, int h, int p, int j) { return ((static_cast<std::size_t>(i) * heads + h) * t + p) * d + j; };
    auto dst = [=](int i, int h, int p, int j) { return (static_cast<std::size_t>(i) * t + p) * dm + h * d + j; };
    for (int i = 0; i < n; ++i)
        for (int h = 0; h < heads; ++h)
            for (int p = 0; p < t; ++p)
                for (int j = 0; j < d; ++j)
                    y.value()[dst(i, h, p, j)] = x.value()[src(i, h, p, j)];
    if (tape.needs_grad({&x})) {
        y.set_requires_grad(true);
        tape.record(y, [=]() mutable {
            for (int i = 0; i < n; ++i)
                for (int h = 0; h < heads; ++h)
                    for (int p = 0; p < t; ++p)
                        for (int j = 0; j < d; ++j)
                            x.grad()[src(i, h, p, j)] += y.grad()[dst(i, h, p, j)];
        });
    }
    return y;
}

} // namespace rawmix::ad
