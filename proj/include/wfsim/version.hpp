#pragma once

namespace wfsim {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kResultSchema = "wfsim-result/1";

} // namespace wfsim
