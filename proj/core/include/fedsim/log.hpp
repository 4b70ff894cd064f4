#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace fedsim::logging {

enum class Level { Off = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };

/// Log threshold from the FEDSIM_LOG environment variable
/// (off|error|warn|info|debug), defaulting to warn. Parsed once.
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("FEDSIM_LOG");
        if (env == nullptr) return Level::Warn;
        if (std::strcmp(env, "off") == 0) return Level::Off;
        if (std::strcmp(env, "error") == 0) return Level::Error;
        if (std::strcmp(env, "warn") == 0) return Level::Warn;
        if (std::strcmp(env, "info") == 0) return Level::Info;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        return Level::Warn;
    }();
    return level;
}

inline bool enabled(Level level) { return level <= threshold(); }

inline void logf(Level level, const char* fmt, ...) {
    if (!enabled(level)) {
        return;
    }
    std::va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
    va_end(args);
}

} // namespace fedsim::logging
