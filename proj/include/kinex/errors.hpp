#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kinex {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A price denominator (effective quantity of a good on the market) vanished.
class SingularMarketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The mean ODE left the nonnegative orthant.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The log-conserved quantity does not exist for a zero saving fraction.
class NotConservedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The closed-form route does not cover these parameters (zero saving fraction).
class UnsupportedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration. Carries every violation found, not just the first.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

    explicit ConfigError(const std::string& violation)
        : ConfigError(std::vector<std::string>{violation}) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += '\n';
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

/// File system failure; the message always names the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace kinex
