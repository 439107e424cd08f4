#include "sepclr/simd/dispatch.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "kernels_impl.hpp"
#include "sepclr/error.hpp"

namespace sepclr::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool is_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() { return is_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::scalar};
  if (is_supported(Isa::avx2)) out.push_back(Isa::avx2);
  return out;
}

const KernelTable& table(Isa isa) {
  if (!is_supported(isa)) {
    throw InvalidArgument("instruction set '" + std::string(to_string(isa)) +
                          "' is not supported on this CPU");
  }
  return isa == Isa::avx2 ? *detail::avx2_table() : detail::scalar_table();
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("SEPCLR_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && is_supported(Isa::avx2)) return Isa::avx2;
  }
  return detected_isa();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table(initial_isa())};
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }
Isa active_isa() { return active().isa; }
void set_active_isa(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

namespace {

void transpose_into(const double* src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
  dst.resize(rows * cols);
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile)
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile)
      for (std::size_t r = r0; r < std::min(rows, r0 + kTile); ++r)
        for (std::size_t c = c0; c < std::min(cols, c0 + kTile); ++c)
          dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

void gemm(const KernelTable& kt, Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  // Transposed operands are materialized so that a single row-major
  // micro-kernel serves every layout.
  thread_local std::vector<double> scratch_a;
  thread_local std::vector<double> scratch_b;
  const double* aa = a;
  const double* bb = b;
  if (ta == Trans::yes) {
    transpose_into(a, k, m, scratch_a);
    aa = scratch_a.data();
  }
  if (tb == Trans::yes) {
    transpose_into(b, n, k, scratch_b);
    bb = scratch_b.data();
  }
  kt.gemm_nn(m, n, k, aa, k, bb, n, c, n, accumulate);
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  gemm(active(), ta, tb, m, n, k, a, b, c, accumulate);
}

}  // namespace sepclr::simd
