#pragma once

namespace occmil {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace occmil
