#include "oracles.hpp"

#include "rawmix/error.hpp"
#include "rawmix/kernels/kernels.hpp"

#include <gtest/gtest.h>

using namespace rawmix;
using namespace rawmix::kernels;

namespace {

// Odd sizes exercise the vector tails.
constexpr int kSizes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 16}, {17, 13, 9}, {33, 65, 31}};

std::vector<double> naive_gemm(Trans ta, Trans tb, int m, int n, int k, const std::vector<double>& a,
                               const std::vector<double>& b)
{
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int p = 0; p < k; ++p) {
                const double av = ta == Trans::no ? a[i * k + p] : a[p * m + i];
                const double bv = tb == Trans::no ? b[p * n + j] : b[j * k + p];
                s += av * bv;
            }
            c[i * n + j] = s;
        }
    return c;
}

class KernelIsa : public ::testing::TestWithParam<Isa> {
protected:
    void SetUp() override
    {
        if (!available(GetParam()))
            GTEST_SKIP() << "ISA not available on this machine";
        previous_ = active().isa;
        select(GetParam());
    }
    void TearDown() override
    {
        if (available(GetParam()))
            select(previous_);
    }
    Isa previous_ = Isa::scalar;
};

} // namespace

TEST_P(KernelIsa, GemmAllTransposesMatchNaive)
{
    std::mt19937_64 rng(1);
    for (auto [m, n, k] : kSizes)
        for (Trans ta : {Trans::no, Trans::yes})
            for (Trans tb : {Trans::no, Trans::yes}) {
                auto a = oracle::random_vec(static_cast<std::size_t>(m) * k, rng);
                auto b = oracle::random_vec(static_cast<std::size_t>(k) * n, rng);
                auto c0 = oracle::random_vec(static_cast<std::size_t>(m) * n, rng);
                const int lda = ta == Trans::no ? k : m, ldb = tb == Trans::no ? n : k;
                auto expect = naive_gemm(ta, tb, m, n, k, a, b);

                std::vector<double> c(c0.size());
                gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c.data(), n, false);
                EXPECT_LT(oracle::max_abs_diff(c, expect), 1e-12 * k);

                c = c0;
                gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c.data(), n, true);
                for (std::size_t i = 0; i < c.size(); ++i)
                    expect[i] += c0[i];
                EXPECT_LT(oracle::max_abs_diff(c, expect), 1e-12 * k);
            }
}

TEST_P(KernelIsa, GemmRespectsLeadingDimensions)
{
    std::mt19937_64 rng(2);
    const int m = 5, n = 6, k = 7, lda = 9, ldb = 8, ldc = 11;
    auto a = oracle::random_vec(m * lda, rng), b = oracle::random_vec(k * ldb, rng);
    std::vector<double> c(m * ldc, 42.0);
    active().gemm_nn(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < ldc; ++j) {
            double s = 42.0;
            if (j < n)
                for (int p = 0; p < k; ++p)
                    s += a[i * lda + p] * b[p * ldb + j];
            EXPECT_NEAR(c[i * ldc + j], s, 1e-12);
        }
}

TEST_P(KernelIsa, VectorKernelsMatchLoops)
{
    std::mt19937_64 rng(3);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 128u, 6401u}) {
        auto x = oracle::random_vec(n, rng), y = oracle::random_vec(n, rng);
        double dot = 0, d2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dot += x[i] * y[i];
            d2 += (x[i] - y[i]) * (x[i] - y[i]);
        }
        EXPECT_NEAR(active().dot(x.data(), y.data(), n), dot, 1e-12 * (n + 1));
        EXPECT_NEAR(active().squared_distance(x.data(), y.data(), n), d2, 1e-12 * (n + 1));
        auto z = y;
        active().axpy(-0.75, x.data(), z.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_NEAR(z[i], y[i] - 0.75 * x[i], 1e-15);
    }
}

INSTANTIATE_TEST_SUITE_P(Isas, KernelIsa, ::testing::Values(Isa::scalar, Isa::avx2),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(KernelEquivalence, Avx2AgreesWithScalar)
{
    if (!available(Isa::avx2))
        GTEST_SKIP() << "AVX2 not available";
    const KernelTable& s = table(Isa::scalar);
    const KernelTable& v = table(Isa::avx2);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 40), n = 1 + static_cast<int>(rng() % 40),
                  k = 1 + static_cast<int>(rng() % 40);
        auto a = oracle::random_vec(m * k, rng), b = oracle::random_vec(k * n, rng);
        auto c1 = oracle::random_vec(m * n, rng);
        auto c2 = c1;
        s.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
        v.gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
        EXPECT_LT(oracle::max_abs_diff(c1, c2), 1e-12 * k);

        const std::size_t len = rng() % 300;
        auto x = oracle::random_vec(len, rng), y = oracle::random_vec(len, rng);
        EXPECT_NEAR(s.dot(x.data(), y.data(), len), v.dot(x.data(), y.data(), len), 1e-12 * (len + 1));
        EXPECT_NEAR(s.squared_distance(x.data(), y.data(), len), v.squared_distance(x.data(), y.data(), len),
                    1e-12 * (len + 1));
        auto y1 = y, y2 = y;
        s.axpy(0.3, x.data(), y1.data(), len);
        v.axpy(0.3, x.data(), y2.data(), len);
        EXPECT_LT(oracle::max_abs_diff(y1, y2), 1e-15);
    }
}

TEST(KernelDispatch, ScalarAlwaysAvailable)
{
    EXPECT_TRUE(available(Isa::scalar));
    EXPECT_EQ(table(Isa::scalar).isa, Isa::scalar);
    EXPECT_EQ(to_string(Isa::avx2), "avx2");
}
