#pragma once

#include <stdexcept>
#include <string>

namespace t2vqa {

// Base for every error the toolkit raises. Messages are single-line so the
// CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by caption/embedding/class-probability providers. `retriable`
// distinguishes transport failures from malformed responses.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retriable)
      : Error(what), retriable_(retriable) {}
  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

}  // namespace t2vqa
