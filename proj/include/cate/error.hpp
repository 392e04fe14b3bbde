#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cate {

enum class ErrorCode {
  EmptySentence,
  SyntaxError,
  VocabularyMismatch,
  NonBinaryNode,
  EmptySegment,
  InvalidTree,
  DimensionMismatch,
  MalformedLine,
  EmptyFile,
  UnlabeledNode,
  EmptyTrainSplit,
  NonFiniteLoss,
  NonPositiveTemperature,
  EmptyValidation,
  EmptyInput,
  TokenMismatch,
  EmptySplit,
  UnknownModelVariant,
  InvalidCheckpoint,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI and the HTTP layer in particular) can map it to an exit
// code or a status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Position-carrying syntax error for the treebank reader. Lines and columns
// are 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, const std::string& message)
      : Error(ErrorCode::SyntaxError,
              "line " + std::to_string(line) + ", column " +
                  std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace cate
