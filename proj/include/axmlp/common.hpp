#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace axmlp {

enum class Err {
    io = 1,
    parse = 2,
    invalid = 3,
    shape = 4,
    internal = 5,
};

// Single exception type for the whole library; the C API maps `code` onto
// its status enum, so keep the numbering in sync with axmlp.h.
class AxError : public std::runtime_error {
  public:
    AxError(Err code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Err code() const { return code_; }

  private:
    Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) {
    throw AxError(code, msg);
}

constexpr uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex16(uint64_t v);

inline int bit_width_u64(uint64_t v) {
    int w = 0;
    while (v) {
        ++w;
        v >>= 1;
    }
    return w;
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Fixed-precision decimal, used wherever text output must be byte-stable.
std::string format_fixed(double v, int digits);

} // namespace axmlp
