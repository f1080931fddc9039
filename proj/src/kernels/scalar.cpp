#include "rawmix/kernels/kernels.hpp"

namespace rawmix::kernels {
namespace {

void gemm_nn_scalar(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                    double* c, int ldc)
{
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        const double* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
            for (int j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

} // namespace

namespace detail {
const KernelTable scalar_table{Isa::scalar, gemm_nn_scalar, dot_scalar, squared_distance_scalar,
                               axpy_scalar};
}

} // namespace rawmix::kernels
