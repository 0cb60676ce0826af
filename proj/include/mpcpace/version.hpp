#pragma once

namespace mpcpace {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mpcpace
