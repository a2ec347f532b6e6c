#include "aegn/log.hpp"

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace aegn {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("AEGNN_LOG");
        if (env == nullptr) return LogLevel::Info;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

namespace {

void vlog(const char* level, const char* tag, const char* fmt, va_list args) {
    std::fprintf(stderr, "[%s] %s: ", level, tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

} // namespace

void log_error(const char* tag, const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    vlog("error", tag, fmt, args);
    va_end(args);
}

void log_info(const char* tag, const char* fmt, ...) {
    if (log_level() < LogLevel::Info) return;
    va_list args;
    va_start(args, fmt);
    vlog("info", tag, fmt, args);
    va_end(args);
}

void log_debug(const char* tag, const char* fmt, ...) {
    if (log_level() < LogLevel::Debug) return;
    va_list args;
    va_start(args, fmt);
    vlog("debug", tag, fmt, args);
    va_end(args);
}

} // namespace aegn
