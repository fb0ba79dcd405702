#pragma once

namespace fastgate {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fastgate
