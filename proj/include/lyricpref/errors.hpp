#pragma once

#include <stdexcept>
#include <string>

namespace lyricpref {

// Base of every error raised by the library. The CLI maps the concrete
// subclass onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input: datasets, configs, model files.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& what) : ValidationError(what) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Anything that went wrong talking to an inference provider.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, bool retriable = false)
        : Error(what), retriable_(retriable) {}

    bool retriable() const { return retriable_; }

private:
    bool retriable_;
};

class UnparseableResponseError : public ProviderError {
public:
    explicit UnparseableResponseError(const std::string& what) : ProviderError(what, false) {}
};

class TaxonomyError : public ProviderError {
public:
    explicit TaxonomyError(const std::string& label)
        : ProviderError("emotion label outside taxonomy: " + label, false), label_(label) {}

    const std::string& label() const { return label_; }

private:
    std::string label_;
};

class CapabilityError : public ProviderError {
public:
    explicit CapabilityError(const std::string& what) : ProviderError(what, false) {}
};

// Numerical or shape problems while computing features / training.
class FeatureError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

} // namespace lyricpref
