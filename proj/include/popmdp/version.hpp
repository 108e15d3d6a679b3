#pragma once

#include <string_view>

namespace popmdp {

inline constexpr std::string_view kVersion = "1.0.0";

}  // namespace popmdp
