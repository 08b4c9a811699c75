// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace openbook
{

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind
{
  Config,     // malformed input, schema violation, bad arguments
  Domain,     // chart evaluated outside its parameter rectangle
  Geometry,   // immersion, transversality, fattening, foliation failures
  Mesh,       // conformity or resolution failures during mesh construction
  Assembly,   // degenerate or inverted elements
  Solver,     // eigensolver non-convergence or invalid input
  Size,       // operation refused because of problem size
  Audit,      // an audited inequality failed
  Io          // file-system failures
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

const char *to_string(ErrorKind kind);

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what)
{
  throw Error(kind, what);
}

}  // namespace openbook
