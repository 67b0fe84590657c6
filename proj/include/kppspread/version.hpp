#pragma once

namespace kppspread {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kppspread
