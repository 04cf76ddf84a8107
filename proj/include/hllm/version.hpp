#pragma once

namespace hllm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hllm
