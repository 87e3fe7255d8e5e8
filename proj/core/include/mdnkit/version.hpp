#pragma once

namespace mdnkit {

inline constexpr const char* kVersionString = "1.0.0";

}  // namespace mdnkit
