#pragma once

// Storage precision of the autodiff core. The library is built with 32-bit
// storage; MDEEG_AUTODIFF_F64 switches to 64-bit for gradient checks. The
// inline namespace keeps the two builds ABI-distinct.
#ifdef MDEEG_AUTODIFF_F64
#define MDEEG_AD_ABI f64
#else
#define MDEEG_AD_ABI f32
#endif

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

#ifdef MDEEG_AUTODIFF_F64
using real_t = double;
#else
using real_t = float;
#endif

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
