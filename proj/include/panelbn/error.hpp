#ifndef PANELBN_ERROR_HPP
#define PANELBN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace panelbn {

// Input or argument violates a documented contract. The CLI maps every
// subclass to exit status 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError("line " + std::to_string(line) + ": " + what), m_line(line) {}

    std::size_t line() const { return m_line; }

private:
    std::size_t m_line;
};

class ConfigurationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyModelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Numerical failures of a single fit: rank-deficient design, zero residual
// variance, zero total variance.
class SingularityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegenerateModelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PlacementError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BootstrapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace panelbn

#endif  // PANELBN_ERROR_HPP
