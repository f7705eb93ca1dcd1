#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace saga {

// Error taxonomy. CLI maps these onto exit codes: config/shape -> 2,
// io/format -> 3, numeric -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : error {
    using error::error;
};
struct shape_error : error {
    using error::error;
};
struct format_error : error {
    using error::error;
};
struct io_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};
struct state_error : error {
    using error::error;
};

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); i++) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <typename T>
inline void ensure_finite(const std::vector<T>& data, const char* where) {
    for (T v : data) {
        if (!std::isfinite(v)) {
            throw numeric_error(std::string("non-finite value produced by ") + where);
        }
    }
}

}  // namespace saga
