#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iacolight
{
    // Coarse error taxonomy. The CLI maps each category to a distinct exit code.
    enum class ErrorCategory
    {
        InvalidConfig,
        InvalidAction,
        InvalidInput,
        Shape,
        Numeric,
        UndefinedMetric,
        Parse,
        Validation,
        Generation,
        Io,
    };

    inline constexpr std::string_view to_string(ErrorCategory c) noexcept
    {
        switch (c)
        {
        case ErrorCategory::InvalidConfig: return "invalid-config";
        case ErrorCategory::InvalidAction: return "invalid-action";
        case ErrorCategory::InvalidInput: return "invalid-input";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::Numeric: return "numeric";
        case ErrorCategory::UndefinedMetric: return "undefined-metric";
        case ErrorCategory::Parse: return "parse";
        case ErrorCategory::Validation: return "validation";
        case ErrorCategory::Generation: return "generation";
        case ErrorCategory::Io: return "io";
        }
        return "unknown";
    }

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorCategory category, const std::string &message)
            : std::runtime_error(message), category_(category)
        {
        }

        ErrorCategory category() const noexcept { return category_; }

    private:
        ErrorCategory category_;
    };

    namespace detail
    {
        template <ErrorCategory C>
        class CategoryError : public Error
        {
        public:
            explicit CategoryError(const std::string &message) : Error(C, message) {}
        };
    } // namespace detail

    using InvalidConfigError = detail::CategoryError<ErrorCategory::InvalidConfig>;
    using InvalidActionError = detail::CategoryError<ErrorCategory::InvalidAction>;
    using InvalidInputError = detail::CategoryError<ErrorCategory::InvalidInput>;
    using ShapeError = detail::CategoryError<ErrorCategory::Shape>;
    using NumericError = detail::CategoryError<ErrorCategory::Numeric>;
    using UndefinedMetricError = detail::CategoryError<ErrorCategory::UndefinedMetric>;
    using ParseError = detail::CategoryError<ErrorCategory::Parse>;
    using ValidationError = detail::CategoryError<ErrorCategory::Validation>;
    using GenerationError = detail::CategoryError<ErrorCategory::Generation>;
    using IoError = detail::CategoryError<ErrorCategory::Io>;

} // namespace iacolight
