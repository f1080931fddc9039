#include "rawmix/kernels/kernels.hpp"

#include <immintrin.h>

namespace rawmix::kernels {
namespace {

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 4x8 register block of C, streamed over k.
inline void block_4x8(int k, const double* a, int lda, const double* b, int ldb, double* c,
                      int ldc)
{
    double* c0 = c;
    double* c1 = c + ldc;
    double* c2 = c + 2 * ldc;
    double* c3 = c + 3 * ldc;
    __m256d r00 = _mm256_loadu_pd(c0), r01 = _mm256_loadu_pd(c0 + 4);
    __m256d r10 = _mm256_loadu_pd(c1), r11 = _mm256_loadu_pd(c1 + 4);
    __m256d r20 = _mm256_loadu_pd(c2), r21 = _mm256_loadu_pd(c2 + 4);
    __m256d r30 = _mm256_loadu_pd(c3), r31 = _mm256_loadu_pd(c3 + 4);
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * lda;
    const double* a3 = a + 3 * lda;
    for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        r00 = _mm256_fmadd_pd(av, b0, r00);
        r01 = _mm256_fmadd_pd(av, b1, r01);
        av = _mm256_broadcast_sd(a1 + p);
        r10 = _mm256_fmadd_pd(av, b0, r10);
        r11 = _mm256_fmadd_pd(av, b1, r11);
        av = _mm256_broadcast_sd(a2 + p);
        r20 = _mm256_fmadd_pd(av, b0, r20);
        r21 = _mm256_fmadd_pd(av, b1, r21);
        av = _mm256_broadcast_sd(a3 + p);
        r30 = _mm256_fmadd_pd(av, b0, r30);
        r31 = _mm256_fmadd_pd(av, b1, r31);
    }
    _mm256_storeu_pd(c0, r00);
    _mm256_storeu_pd(c0 + 4, r01);
    _mm256_storeu_pd(c1, r10);
    _mm256_storeu_pd(c1 + 4, r11);
    _mm256_storeu_pd(c2, r20);
    _mm256_storeu_pd(c2 + 4, r21);
    _mm256_storeu_pd(c3, r30);
    _mm256_storeu_pd(c3 + 4, r31);
}

// Single row of C, vectorized along n.
inline void row_1xn(int n, int k, const double* a, const double* b, int ldb, double* c)
{
    int j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256d r0 = _mm256_loadu_pd(c + j);
        __m256d r1 = _mm256_loadu_pd(c + j + 4);
        for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<std::ptrdiff_t>(p) * ldb + j;
            const __m256d av = _mm256_broadcast_sd(a + p);
            r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), r0);
            r1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), r1);
        }
        _mm256_storeu_pd(c + j, r0);
        _mm256_storeu_pd(c + j + 4, r1);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d r0 = _mm256_loadu_pd(c + j);
        for (int p = 0; p < k; ++p) {
            const __m256d av = _mm256_broadcast_sd(a + p);
            r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + static_cast<std::ptrdiff_t>(p) * ldb + j),
                                 r0);
        }
        _mm256_storeu_pd(c + j, r0);
    }
    for (; j < n; ++j) {
        double s = c[j];
        for (int p = 0; p < k; ++p)
            s += a[p] * b[static_cast<std::ptrdiff_t>(p) * ldb + j];
        c[j] = s;
    }
}

void gemm_nn_avx2(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                  double* c, int ldc)
{
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* ai = a + static_cast<std::ptrdiff_t>(i) * lda;
        double* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
        int j = 0;
        for (; j + 8 <= n; j += 8)
            block_4x8(k, ai, lda, b + j, ldb, ci + j, ldc);
        if (j < n) {
            for (int r = 0; r < 4; ++r)
                row_1xn(n - j, k, ai + r * lda, b + j, ldb, ci + r * ldc + j);
        }
    }
    for (; i < m; ++i)
        row_1xn(n, k, a + static_cast<std::ptrdiff_t>(i) * lda, b, ldb,
                c + static_cast<std::ptrdiff_t>(i) * ldc);
}

double dot_avx2(const double* a, const double* b, std::size_t n)
{
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n)
{
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        s0 = _mm256_fmadd_pd(d0, d0, s0);
        s1 = _mm256_fmadd_pd(d1, d1, s1);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n)
{
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

} // namespace

namespace detail {
const KernelTable avx2_table{Isa::avx2, gemm_nn_avx2, dot_avx2, squared_distance_avx2, axpy_avx2};
}

} // namespace rawmix::kernels
