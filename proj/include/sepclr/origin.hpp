#pragma once

#include <cstdint>
#include <string_view>

namespace sepclr {

/// Which dataset a sample comes from.
enum class Origin : std::uint8_t { background = 0, target = 1 };

inline std::string_view to_string(Origin o) { return o == Origin::background ? "background" : "target"; }

}  // namespace sepclr
