#ifndef MHTRACK_ERRORS_HPP_
#define MHTRACK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mhtrack
{
    /// Base class for every error raised by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class DimensionError : public Error { public: using Error::Error; };
    class ParameterError : public Error { public: using Error::Error; };
    class SymmetryError : public Error { public: using Error::Error; };
    class SingularityError : public Error { public: using Error::Error; };
    class StateError : public Error { public: using Error::Error; };
    class NumericError : public Error { public: using Error::Error; };
    class ConditioningError : public Error { public: using Error::Error; };
    class SizeError : public Error { public: using Error::Error; };
    class BoundaryError : public Error { public: using Error::Error; };

    /// Invalid user input: degenerate boxes, unreadable datasets, bad config.
    class InputError : public Error { public: using Error::Error; };
    class ScenarioError : public InputError { public: using InputError::InputError; };

    class DivergenceError : public Error
    {
    public:
        DivergenceError(const std::string& what, int iteration)
            : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
        int iteration() const noexcept { return iteration_; }

    private:
        int iteration_;
    };

    class IngestionError : public InputError
    {
    public:
        IngestionError(const std::string& layer, const std::string& what)
            : InputError("layer '" + layer + "': " + what), layer_(layer) {}
        const std::string& layer() const noexcept { return layer_; }

    private:
        std::string layer_;
    };

    class ParseError : public InputError
    {
    public:
        ParseError(const std::string& file, int line, const std::string& what)
            : InputError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
        int line() const noexcept { return line_; }

    private:
        int line_;
    };
}

#endif
