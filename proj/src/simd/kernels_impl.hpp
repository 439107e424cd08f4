#pragma once

#include "sepclr/simd/dispatch.hpp"

namespace sepclr::simd::detail {

const KernelTable& scalar_table();
// Null when the build target has no AVX2 translation unit.
const KernelTable* avx2_table();

}  // namespace sepclr::simd::detail
