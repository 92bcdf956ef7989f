#pragma once

#include <stdexcept>
#include <string>

namespace truncgauss {

class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: wrong dimensions, invalid config values, non-finite data.
class validation_error : public error {
public:
    explicit validation_error(const std::string& what) : error(what) {}
};

class dimension_mismatch_error : public validation_error {
public:
    explicit dimension_mismatch_error(const std::string& what) : validation_error(what) {}
};

// Numerical breakdown: failed factorization, overflowed objective, non-PD input.
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& what) : error(what) {}
};

// Rejection sampling exhausted its attempt budget; carries the acceptance
// rate observed so far so callers can report how thin the set is.
class low_mass_error : public numerical_error {
public:
    low_mass_error(const std::string& what, double observed_acceptance)
        : numerical_error(what), observed_acceptance_(observed_acceptance) {}
    double observed_acceptance() const { return observed_acceptance_; }

private:
    double observed_acceptance_;
};

// A requested enumeration or grid would not fit in memory.
class size_error : public validation_error {
public:
    explicit size_error(const std::string& what) : validation_error(what) {}
};

class insufficient_data_error : public validation_error {
public:
    explicit insufficient_data_error(const std::string& what) : validation_error(what) {}
};

}  // namespace truncgauss
