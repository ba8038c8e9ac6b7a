#pragma once

#include "wagf/real.hpp"

WAGF_BEGIN_NAMESPACE
namespace cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

int run(int argc, char** argv);

}  // namespace cli
WAGF_END_NAMESPACE
