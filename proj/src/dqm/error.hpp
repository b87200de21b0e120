#pragma once

#include <stdexcept>
#include <string>

namespace dqm {

// Base of all library errors. The category maps one-to-one onto the C API
// status codes and the CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { invalid_argument, config, numerical, io };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error(Category::invalid_argument, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace dqm
