#pragma once

namespace ammfg {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ammfg
