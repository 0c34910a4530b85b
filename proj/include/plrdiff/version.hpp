#pragma once

namespace plrdiff {

inline constexpr const char *kVersion = "0.1.0";

} // namespace plrdiff
