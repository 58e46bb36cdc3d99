#pragma once

namespace dsd {

inline constexpr const char* version_string = "0.1.0";
inline constexpr unsigned dict_file_version = 1;

} // namespace dsd
