#include "cforge/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace cforge::log {

namespace {

Level level_from_env()
{
    const char* env = std::getenv("CONCEPT_FORGE_LOG");
    if (env == nullptr) {
        return Level::info;
    }
    const std::string_view v(env);
    if (v == "error") {
        return Level::error;
    }
    if (v == "debug") {
        return Level::debug;
    }
    return Level::info;
}

std::atomic<int>& current()
{
    static std::atomic<int> lvl{static_cast<int>(level_from_env())};
    return lvl;
}

std::mutex& sink_mutex()
{
    static std::mutex m;
    return m;
}

}  // namespace

Level level() noexcept { return static_cast<Level>(current().load(std::memory_order_relaxed)); }

void set_level(Level lvl) noexcept { current().store(static_cast<int>(lvl)); }

void write(Level lvl, const std::string& message)
{
    static constexpr std::string_view kTags[] = {"error", "info", "debug"};
    std::lock_guard lock(sink_mutex());
    std::cerr << '[' << kTags[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace cforge::log
