#pragma once

namespace convlat {
inline constexpr const char *kVersion = "0.1.0";
}
