#pragma once

namespace aegn {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level is read once from the AEGNN_LOG environment variable
// (error | info | debug, default info). Messages go to stderr as
// "[level] tag: message".
LogLevel log_level();

#if defined(__GNUC__)
#define AEGN_PRINTF_ATTR __attribute__((format(printf, 2, 3)))
#else
#define AEGN_PRINTF_ATTR
#endif

void log_error(const char* tag, const char* fmt, ...) AEGN_PRINTF_ATTR;
void log_info(const char* tag, const char* fmt, ...) AEGN_PRINTF_ATTR;
void log_debug(const char* tag, const char* fmt, ...) AEGN_PRINTF_ATTR;

#undef AEGN_PRINTF_ATTR

} // namespace aegn
