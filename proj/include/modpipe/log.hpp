#pragma once

#include <functional>
#include <string>

namespace modpipe {

/// Writes "warning: <message>" to stderr, or to the installed sink.
void log_warning(const std::string& message);

/// Replaces the warning sink (tests capture warnings this way). Passing an
/// empty function restores stderr.
void set_warning_sink(std::function<void(const std::string&)> sink);

}  // namespace modpipe
