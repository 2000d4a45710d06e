#pragma once

#include "roomest/simd/kernels.hpp"

namespace roomest::simd::detail {

#if defined(ROOMEST_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

}  // namespace roomest::simd::detail
