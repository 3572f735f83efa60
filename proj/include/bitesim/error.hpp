#pragma once

#include <stdexcept>
#include <string>

namespace bitesim {

// Base of every error this library throws. Callers that only care about
// "the library rejected this" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistryError : public Error { public: using Error::Error; };
class LayoutError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class ModelError : public Error { public: using Error::Error; };
class CoverageError : public Error { public: using Error::Error; };
class FittingError : public Error { public: using Error::Error; };

}  // namespace bitesim
