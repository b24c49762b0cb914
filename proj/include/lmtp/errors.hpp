#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace lmtp {

enum class ErrorKind {
  schema,       // missing or malformed column in an input file
  data,         // bad cell value (empty, NaN, unparsable)
  validation,   // structurally invalid input (shapes, ordering, ranges)
  config,       // bad configuration value
  policy,       // policy could not be applied
  estimation,   // nuisance fitting or EIF assembly failed
  numerical,    // linear algebra / special function failure
  calibration,  // simulation calibration failed
};

const char* to_string(ErrorKind kind);

// Exit code the CLI uses for an error of this kind: 2 for input problems,
// 1 for estimation and numerical failures.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> row,
        std::string column)
      : std::runtime_error(message), kind_(kind), row_(row), column_(std::move(column)) {}

  ErrorKind kind() const { return kind_; }
  // One-based data row (excluding the header) for data errors, when known.
  std::optional<std::size_t> row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> row_;
  std::string column_;
};

}  // namespace lmtp
