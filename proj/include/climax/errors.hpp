#ifndef CLIMAX_ERRORS_HPP
#define CLIMAX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace climax {

// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorKind { Config, Data, Model, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CLIMAX_DEFINE_ERROR(Name, Kind)                     \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& what)                  \
        : Error(ErrorKind::Kind, std::string(#Name ": ") + what) {} \
  };

CLIMAX_DEFINE_ERROR(ConfigError, Config)
CLIMAX_DEFINE_ERROR(InvalidTrainingData, Data)
CLIMAX_DEFINE_ERROR(SchemaError, Data)
CLIMAX_DEFINE_ERROR(InsufficientData, Data)
CLIMAX_DEFINE_ERROR(DimensionError, Data)
CLIMAX_DEFINE_ERROR(ModelUnavailable, Model)
CLIMAX_DEFINE_ERROR(SingleClassNeighborhood, Numerical)
CLIMAX_DEFINE_ERROR(SingularSystem, Numerical)
CLIMAX_DEFINE_ERROR(DegenerateComponent, Numerical)
CLIMAX_DEFINE_ERROR(IllConditioned, Numerical)

#undef CLIMAX_DEFINE_ERROR

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Model: return 4;
    case ErrorKind::Numerical: return 5;
  }
  return 1;
}

}  // namespace climax

#endif  // CLIMAX_ERRORS_HPP
