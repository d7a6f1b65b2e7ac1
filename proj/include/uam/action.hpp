#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace uam {

// Altitude advisories. The numeric values are the serialized encoding.
enum class Action : std::uint8_t { Hold = 0, Descend = 1, Climb = 2 };

inline constexpr std::size_t kNumActions = 3;
inline constexpr std::array<Action, kNumActions> kAllActions{Action::Hold, Action::Descend, Action::Climb};

inline constexpr int action_code(Action a) { return static_cast<int>(a); }

inline constexpr std::string_view action_name(Action a) {
  switch (a) {
    case Action::Hold: return "hold";
    case Action::Descend: return "descend";
    case Action::Climb: return "climb";
  }
  return "?";
}

// (hold, descend, climb) availability.
using ActionMask = std::array<bool, kNumActions>;

}  // namespace uam
