#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plp {

// Broad failure class; the CLI maps each onto a process exit code.
enum class ErrorCategory { config, data, network, internal };

int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), category_(category), kind_(std::move(kind)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorCategory category_;
    std::string kind_;
};

#define PLP_DEFINE_ERROR(Name, Category)                                    \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& message)                           \
            : Error(ErrorCategory::Category, #Name, message) {}             \
    };

// core
PLP_DEFINE_ERROR(ZeroVector, data)
PLP_DEFINE_ERROR(DimensionMismatch, data)
PLP_DEFINE_ERROR(PreconditionError, internal)

// files and schemas
PLP_DEFINE_ERROR(ParseError, data)
PLP_DEFINE_ERROR(ValidationError, data)
PLP_DEFINE_ERROR(SchemaVersionMismatch, data)
PLP_DEFINE_ERROR(ConfigError, config)
PLP_DEFINE_ERROR(IoError, data)

// dataset
PLP_DEFINE_ERROR(MissingClass, data)
PLP_DEFINE_ERROR(SingletonDataset, data)

// captiongen
PLP_DEFINE_ERROR(LlmUnavailable, network)
PLP_DEFINE_ERROR(MalformedResponse, network)
PLP_DEFINE_ERROR(PolicyRefusal, network)
PLP_DEFINE_ERROR(MissingBundle, data)

// embedder
PLP_DEFINE_ERROR(BackendUnavailable, network)
PLP_DEFINE_ERROR(TokenizationError, data)
PLP_DEFINE_ERROR(CorruptCache, data)

// features / regressor / zeroshot / metrics
PLP_DEFINE_ERROR(WrongArity, data)
PLP_DEFINE_ERROR(MissingTarget, data)
PLP_DEFINE_ERROR(EmptyDataset, data)
PLP_DEFINE_ERROR(SingularSystem, data)
PLP_DEFINE_ERROR(InsufficientGroups, data)
PLP_DEFINE_ERROR(VersionMismatch, data)
PLP_DEFINE_ERROR(EmptyRows, data)
PLP_DEFINE_ERROR(EmptyTestSplit, data)
PLP_DEFINE_ERROR(ConstantSeries, data)

#undef PLP_DEFINE_ERROR

class DecodeError : public Error {
public:
    DecodeError(std::size_t index, const std::string& message)
        : Error(ErrorCategory::data, "DecodeError",
                "image " + std::to_string(index) + ": " + message),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace plp
