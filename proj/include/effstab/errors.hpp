#ifndef EFFSTAB_ERRORS_HPP
#define EFFSTAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace effstab
{

// Base class for all library errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A point or a map leaves the domain on which a series is defined.
class DomainError : public Error
{
public:
    using Error::Error;
};

// A series violates its reality invariant beyond tolerance.
class CorruptSeriesError : public Error
{
public:
    using Error::Error;
};

// Invalid parameters, malformed files, or search caps that are too small.
class ConfigError : public Error
{
public:
    using Error::Error;
};

// Exact integer arithmetic left the 64-bit range.
class OverflowError : public Error
{
public:
    using Error::Error;
};

// Linear dependence where independence is required.
class DependenceError : public Error
{
public:
    using Error::Error;
};

// An iterative scheme stopped contracting.
class DivergenceError : public Error
{
public:
    using Error::Error;
};

// Internal arithmetic produced a state that the theory rules out.
class InconsistencyError : public Error
{
public:
    using Error::Error;
};

// Integrator failure (non-finite state, implicit solve not converging).
class IntegrationError : public Error
{
public:
    using Error::Error;
};

} // namespace effstab

#endif
