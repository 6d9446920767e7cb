#include "axmlp/common.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace axmlp {

std::string hex16(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
    return std::string(buf);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Err::io, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        fail(Err::io, "read failed: " + path);
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Err::io, "cannot open file for writing: " + path);
    out.write(content.data(), (std::streamsize)content.size());
    if (!out)
        fail(Err::io, "write failed: " + path);
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return std::string(buf);
}

} // namespace axmlp
