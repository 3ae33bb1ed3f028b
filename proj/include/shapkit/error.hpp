#pragma once

#include <stdexcept>
#include <string>

namespace shapkit {

// Broad failure classes; the CLI maps these onto exit codes.
enum class ErrorClass {
  kUsage,    // caller misuse: bad arguments, protocol violations
  kData,     // malformed or inconsistent inputs
  kBackend,  // network / model backend
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

#define SHAPKIT_DEFINE_ERROR(Name, Class)                                     \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
  };

SHAPKIT_DEFINE_ERROR(InvalidArgument, kUsage)
SHAPKIT_DEFINE_ERROR(OutOfRange, kUsage)
SHAPKIT_DEFINE_ERROR(ResourceLimitError, kUsage)
SHAPKIT_DEFINE_ERROR(InfeasibleError, kData)
SHAPKIT_DEFINE_ERROR(ParseError, kData)
SHAPKIT_DEFINE_ERROR(NotFoundError, kData)
SHAPKIT_DEFINE_ERROR(SessionClosedError, kUsage)
SHAPKIT_DEFINE_ERROR(ProtocolError, kUsage)
SHAPKIT_DEFINE_ERROR(IllegalActionError, kUsage)
SHAPKIT_DEFINE_ERROR(ReplayError, kData)
SHAPKIT_DEFINE_ERROR(ProvenanceError, kData)
SHAPKIT_DEFINE_ERROR(EnvMismatchError, kData)
SHAPKIT_DEFINE_ERROR(DegenerateSplitError, kData)
SHAPKIT_DEFINE_ERROR(NoCounterpartyError, kUsage)

#undef SHAPKIT_DEFINE_ERROR

// Tag framing problem: missing or mismatched <s>/</s>.
class FrameError : public Error {
 public:
  explicit FrameError(const std::string& what) : Error(ErrorClass::kData, what) {}
};

// Text was framed correctly but matched none of the message templates.
class GrammarError : public Error {
 public:
  GrammarError(const std::string& what, std::string span)
      : Error(ErrorClass::kData, what + ": '" + span + "'"), span_(std::move(span)) {}
  const std::string& span() const noexcept { return span_; }

 private:
  std::string span_;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, int attempts)
      : Error(ErrorClass::kBackend, what + " (attempts: " + std::to_string(attempts) + ")"),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace shapkit
