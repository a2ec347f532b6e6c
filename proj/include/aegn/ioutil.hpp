#pragma once

#include <functional>
#include <iosfwd>
#include <string>

namespace aegn {

// Writes through a temporary file in the same directory and renames it
// into place, so readers never observe a half-written file.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer);

// Incremental CRC-32 (reflected, polynomial 0xEDB88320). Seed with
// crc32_init(), feed bytes, finish with crc32_final().
uint32_t crc32_init();
uint32_t crc32_update(uint32_t state, const void* data, size_t len);
uint32_t crc32_final(uint32_t state);

} // namespace aegn
