#pragma once

namespace wsnest {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wsnest
