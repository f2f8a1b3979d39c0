#pragma once

namespace bbm {
inline constexpr const char* kVersion = "0.1.0";
}
