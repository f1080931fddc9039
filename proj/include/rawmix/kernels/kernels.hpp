#pragma once

// Data-parallel inner loops. Each kernel has a portable scalar reference and,
// on x86-64, an AVX2/FMA variant. The variant is picked once at startup from
// CPUID; RAWMIX_KERNELS=scalar in the environment forces the reference path.

#include <cstddef>
#include <string_view>

namespace rawmix::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
    Isa isa;
    /// C[M,N] += A[M,K] * B[K,N], all row-major with explicit leading dims.
    void (*gemm_nn)(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                    double* c, int ldc);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

bool available(Isa isa);
const KernelTable& table(Isa isa);
const KernelTable& active();
/// Overrides the startup choice; throws rawmix::Error if `isa` is unsupported here.
void select(Isa isa);

enum class Trans { no, yes };

/// General product on the active table: C = op(A) * op(B) (+ C when accumulate).
/// op(A) is M x K and op(B) is K x N; transposed operands are packed first.
void gemm(Trans ta, Trans tb, int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate);

namespace detail {
extern const KernelTable scalar_table;
#if defined(RAWMIX_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
} // namespace detail

} // namespace rawmix::kernels
