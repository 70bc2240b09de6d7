// Copyright (c) 2026 uwgs contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace uwgs {

// Error taxonomy mirrored by the C API status codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

} // namespace uwgs
