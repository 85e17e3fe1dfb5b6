// version.hpp

#pragma once

namespace vapormem {

inline constexpr const char* version_string = "0.1.0";

} // namespace vapormem
