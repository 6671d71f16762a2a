#pragma once

#include <array>
#include <charconv>
#include <stdexcept>
#include <string>
#include <utility>

namespace ionx {

/// Elementary charge in coulombs (exact SI value).
inline constexpr double kElementaryCharge = 1.602176634e-19;

/// Error category, mapped onto process exit codes by the CLI:
/// Usage (bad arguments or config) exits 2, Runtime (numeric failure) exits 1.
enum class ErrorKind { Usage, Runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message,
          std::string pointer = {})
        : std::runtime_error(message),
          kind_(kind),
          code_(std::move(code)),
          pointer_(std::move(pointer)) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Stable machine-readable identifier, e.g. "CONFIG_SCHEMA".
    const std::string& code() const noexcept { return code_; }

    /// JSON pointer to the offending config key; empty for non-config errors.
    const std::string& pointer() const noexcept { return pointer_; }

private:
    ErrorKind kind_;
    std::string code_;
    std::string pointer_;
};

[[noreturn]] inline void throw_usage(std::string code, const std::string& message,
                                     std::string pointer = {}) {
    throw Error(ErrorKind::Usage, std::move(code), message, std::move(pointer));
}

[[noreturn]] inline void throw_runtime(std::string code, const std::string& message) {
    throw Error(ErrorKind::Runtime, std::move(code), message);
}

/// Shortest round-trip decimal form, locale-independent. Every numeric value
/// written to CSV or MatrixMarket goes through here so reruns are
/// byte-identical.
inline std::string format_double(double v) {
    std::array<char, 64> buf;
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace ionx
