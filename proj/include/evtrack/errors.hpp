#pragma once

#include <stdexcept>
#include <string>

namespace evt {

/// Bad configuration (unknown key, invalid value). CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Broken internal invariant. CLI exit code 4.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace evt
