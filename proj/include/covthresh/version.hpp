#pragma once

namespace covthresh {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace covthresh
