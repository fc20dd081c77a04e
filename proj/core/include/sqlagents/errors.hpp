#pragma once

#include <stdexcept>
#include <string>

namespace sqlagents {

// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// dataset
class LoadError : public Error { using Error::Error; };
class ParseError : public Error {
public:
    ParseError(std::size_t record_index, const std::string& what);
    std::size_t record_index() const noexcept { return record_index_; }

private:
    std::size_t record_index_;
};
class IntegrityError : public Error { using Error::Error; };
class NotFoundError : public Error { using Error::Error; };
class StorageError : public Error { using Error::Error; };

// sqlexec
class TimingError : public Error { using Error::Error; };

// Caller broke a documented precondition.
class ContractError : public Error { using Error::Error; };

// backend
class BackendError : public Error { using Error::Error; };
// Transient transport failure; retried by ChatClient before surfacing.
class TransportError : public BackendError { using BackendError::BackendError; };
// Server reported the prompt plus budget exceeds the model context.
class OverflowError : public BackendError { using BackendError::BackendError; };

// prompts
class RenderError : public Error { using Error::Error; };

// runner / report
class ConfigError : public Error { using Error::Error; };
class ResumeError : public Error { using Error::Error; };
class ReportError : public Error { using Error::Error; };

}  // namespace sqlagents
