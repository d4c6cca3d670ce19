#pragma once

namespace mltr {
inline constexpr const char* kVersion = "0.1.0";
}
