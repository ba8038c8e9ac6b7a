#pragma once

// Numeric precision is fixed per build. The default library is single
// precision; the `wagf64` targets are compiled with WAGF_DOUBLE for
// finite-difference verification. Each precision lives in its own inline
// namespace so both libraries can be linked into one executable.

#if defined(WAGF_DOUBLE)
#define WAGF_PRECISION_NS f64
#else
#define WAGF_PRECISION_NS f32
#endif

#define WAGF_BEGIN_NAMESPACE \
  namespace wagf {           \
  inline namespace WAGF_PRECISION_NS {
#define WAGF_END_NAMESPACE \
  }                        \
  }

WAGF_BEGIN_NAMESPACE

#if defined(WAGF_DOUBLE)
using Real = double;
inline constexpr const char* kDtypeName = "f64";
#else
using Real = float;
inline constexpr const char* kDtypeName = "f32";
#endif

WAGF_END_NAMESPACE
