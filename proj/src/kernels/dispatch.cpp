#include "rawmix/kernels/kernels.hpp"

#include "rawmix/error.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <vector>

namespace rawmix::kernels {
namespace {

bool cpu_has_avx2()
{
#if defined(RAWMIX_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table()
{
    const char* forced = std::getenv("RAWMIX_KERNELS");
    if (forced && std::strcmp(forced, "scalar") == 0)
        return &detail::scalar_table;
#if defined(RAWMIX_HAVE_AVX2)
    if (cpu_has_avx2())
        return &detail::avx2_table;
#endif
    return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current()
{
    static std::atomic<const KernelTable*> ptr{initial_table()};
    return ptr;
}

} // namespace

std::string_view to_string(Isa isa)
{
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool available(Isa isa)
{
    if (isa == Isa::scalar)
        return true;
    return cpu_has_avx2();
}

const KernelTable& table(Isa isa)
{
    if (!available(isa))
        fail(ErrorKind::config, "kernel variant '" + std::string(to_string(isa)) +
                                    "' is not available on this CPU/build");
#if defined(RAWMIX_HAVE_AVX2)
    if (isa == Isa::avx2)
        return detail::avx2_table;
#endif
    return detail::scalar_table;
}

const KernelTable& active()
{
    return *current().load(std::memory_order_relaxed);
}

void select(Isa isa)
{
    current().store(&table(isa), std::memory_order_relaxed);
}

void gemm(Trans ta, Trans tb, int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate)
{
    if (!accumulate) {
        for (int i = 0; i < m; ++i)
            std::memset(c + static_cast<std::ptrdiff_t>(i) * ldc, 0, sizeof(double) * n);
    }
    if (m == 0 || n == 0 || k == 0)
        return;

    thread_local std::vector<double> pack_a;
    thread_local std::vector<double> pack_b;

    if (ta == Trans::yes) {
        // stored K x M
        pack_a.resize(static_cast<std::size_t>(m) * k);
        for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i)
                pack_a[static_cast<std::size_t>(i) * k + p] = a[static_cast<std::ptrdiff_t>(p) * lda + i];
        a = pack_a.data();
        lda = k;
    }
    if (tb == Trans::yes) {
        // stored N x K
        pack_b.resize(static_cast<std::size_t>(k) * n);
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < k; ++p)
                pack_b[static_cast<std::size_t>(p) * n + j] = b[static_cast<std::ptrdiff_t>(j) * ldb + p];
        b = pack_b.data();
        ldb = n;
    }
    active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

} // namespace rawmix::kernels
