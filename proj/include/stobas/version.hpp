#pragma once

namespace stobas {

inline constexpr const char* kVersion = "0.1.0";

} // namespace stobas
