#pragma once

namespace stmc {
inline constexpr const char* kVersion = "0.1.0";
}
