#pragma once

#include <stdexcept>

namespace cprdraft {

/// Invalid user input or malformed data file. The CLI reports these with
/// exit code 1; anything else escaping a command is an internal error.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace cprdraft
