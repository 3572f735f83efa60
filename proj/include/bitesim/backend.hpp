#pragma once

#include <optional>
#include <string>

namespace bitesim {

// A language-model service that answers a text prompt about an image.
// Returns nullopt when no usable reply was obtained.
class LanguageBackend {
 public:
  virtual ~LanguageBackend() = default;
  virtual std::optional<std::string> complete(const std::string& prompt,
                                              const std::string& image_ref) = 0;
};

}  // namespace bitesim
