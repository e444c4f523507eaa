#pragma once

#include <stdexcept>
#include <string>

namespace scenegraft {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when an external client (scorer/captioner/refiner) fails for good
// after its retry budget.
struct ClientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace scenegraft
