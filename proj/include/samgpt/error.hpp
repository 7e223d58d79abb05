#pragma once

#include <stdexcept>
#include <string>

namespace samgpt {

// Each category maps to a stable CLI error tag (see cli.cpp).

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Target domain appears in the source roster, or roster/checkpoint mismatch.
struct RosterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpisodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace samgpt
