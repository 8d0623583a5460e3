#pragma once

#include <stdexcept>
#include <string>

namespace wq4ts {

// Coarse failure classes. The C API and the CLI exit codes are derived from
// these, so the numbering is part of the public contract.
enum class ErrorKind {
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kFormat = 4,
  kData = 5,
  kNumeric = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string name, const std::string& what)
      : std::runtime_error(what), kind_(kind), name_(std::move(name)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short type tag such as "ScaleError"; used in machine-readable reports.
  const std::string& name() const noexcept { return name_; }

 private:
  ErrorKind kind_;
  std::string name_;
};

#define WQ4TS_DEFINE_ERROR(Type, Kind)                                  \
  class Type : public Error {                                           \
   public:                                                              \
    explicit Type(const std::string& what) : Error(Kind, #Type, what) {} \
  }

WQ4TS_DEFINE_ERROR(PreconditionError, ErrorKind::kInvalidArgument);
WQ4TS_DEFINE_ERROR(ShapeError, ErrorKind::kInvalidArgument);
WQ4TS_DEFINE_ERROR(CacheMismatchError, ErrorKind::kInvalidArgument);
WQ4TS_DEFINE_ERROR(OddKernelError, ErrorKind::kInvalidArgument);

WQ4TS_DEFINE_ERROR(NormalizationError, ErrorKind::kNumeric);
WQ4TS_DEFINE_ERROR(ConvergenceError, ErrorKind::kNumeric);
WQ4TS_DEFINE_ERROR(DegenerateError, ErrorKind::kNumeric);
WQ4TS_DEFINE_ERROR(ScaleError, ErrorKind::kInvalidArgument);
WQ4TS_DEFINE_ERROR(NumericError, ErrorKind::kNumeric);

WQ4TS_DEFINE_ERROR(IoError, ErrorKind::kIo);
WQ4TS_DEFINE_ERROR(FormatError, ErrorKind::kFormat);

WQ4TS_DEFINE_ERROR(ParseError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(MissingHeaderError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(RaggedLengthError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(UnknownLabelError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(TooShortError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(EmptyDomainError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(EmptySplitError, ErrorKind::kData);
WQ4TS_DEFINE_ERROR(EmptyMaskError, ErrorKind::kData);

WQ4TS_DEFINE_ERROR(ConfigError, ErrorKind::kConfig);

#undef WQ4TS_DEFINE_ERROR

}  // namespace wq4ts
