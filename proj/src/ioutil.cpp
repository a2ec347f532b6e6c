#include "aegn/ioutil.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "aegn/errors.hpp"

namespace aegn {

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot create '" + tmp + "'");
        writer(out);
        out.flush();
        if (!out)
            throw IoError("failed writing '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

} // namespace

uint32_t crc32_init() {
    return 0xFFFFFFFFu;
}

uint32_t crc32_update(uint32_t state, const void* data, size_t len) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i)
        state = table[(state ^ p[i]) & 0xffu] ^ (state >> 8);
    return state;
}

uint32_t crc32_final(uint32_t state) {
    return state ^ 0xFFFFFFFFu;
}

} // namespace aegn
