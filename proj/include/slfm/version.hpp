#pragma once

namespace slfm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace slfm
