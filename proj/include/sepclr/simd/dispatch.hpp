#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace sepclr::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Function table for one instruction set. Every kernel has a scalar
/// reference; vector variants must agree with it to rounding.
struct KernelTable {
  Isa isa;
  /// C[m x n] = A[m x k] * B[k x n] (or += when accumulate), row-major
  /// with explicit leading dimensions.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* x, const double* y, std::size_t n);
};

/// Best instruction set the running CPU supports.
Isa detected_isa();
bool is_supported(Isa isa);

/// Table used by the library. Chosen once from SEPCLR_ISA (scalar|avx2|auto)
/// or the detected CPU; tests may switch it with set_active_isa.
const KernelTable& active();
const KernelTable& table(Isa isa);
Isa active_isa();
void set_active_isa(Isa isa);

/// All instruction sets usable on this machine, scalar first.
std::vector<Isa> available_isas();

enum class Trans { no, yes };

/// C = op(A) * op(B) (+ C when accumulate) for contiguous row-major
/// operands. op(A) is m x k, op(B) is k x n.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate = false);
void gemm(const KernelTable& kt, Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate = false);

}  // namespace sepclr::simd
