#pragma once

#include <functional>
#include <string_view>

namespace igda {

using WarningSink = std::function<void(std::string_view)>;

/// Emits a warning through the installed sink (stderr by default).
void warn(std::string_view message);

/// Replaces the sink; returns the previous one. Pass nullptr to silence.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace igda
