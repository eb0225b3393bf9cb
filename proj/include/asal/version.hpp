#pragma once

namespace asal {
inline constexpr const char* kVersion = "0.1.0";
}
