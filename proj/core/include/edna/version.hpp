#pragma once

namespace edna {

inline constexpr const char* kEngineVersion = "0.1.0";

} // namespace edna
