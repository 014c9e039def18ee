#pragma once

namespace netdirect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace netdirect
