#pragma once

#include <sstream>
#include <string>
#include <utility>

namespace cforge::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Current threshold. Initialized from CONCEPT_FORGE_LOG (error|info|debug),
/// default info.
Level level() noexcept;
void set_level(Level lvl) noexcept;

/// Messages go to stderr so stdout stays machine-readable.
void write(Level lvl, const std::string& message);

template <typename... Args>
void emit(Level lvl, Args&&... args)
{
    if (static_cast<int>(lvl) > static_cast<int>(level())) {
        return;
    }
    std::ostringstream os;
    (os << ... << std::forward<Args>(args));
    write(lvl, os.str());
}

template <typename... Args>
void error(Args&&... args) { emit(Level::error, std::forward<Args>(args)...); }
template <typename... Args>
void info(Args&&... args) { emit(Level::info, std::forward<Args>(args)...); }
template <typename... Args>
void debug(Args&&... args) { emit(Level::debug, std::forward<Args>(args)...); }

}  // namespace cforge::log
