#pragma once

#include <stdexcept>
#include <string>

namespace ccml {

/// Base for every error the library raises. `code()` is a short stable
/// identifier ("TooShort", "ShapeError", ...) used by the CLI and tests.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define CCML_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  }

// audio-dsp
CCML_DEFINE_ERROR(InvalidAudio);
CCML_DEFINE_ERROR(TooShort);
CCML_DEFINE_ERROR(DegenerateFilterbank);
CCML_DEFINE_ERROR(CacheError);

// tensor-autodiff
CCML_DEFINE_ERROR(ShapeError);
CCML_DEFINE_ERROR(NoGraph);
CCML_DEFINE_ERROR(NumericFault);
CCML_DEFINE_ERROR(OptimizerError);

// models
CCML_DEFINE_ERROR(ConfigError);
CCML_DEFINE_ERROR(CheckpointError);

// datasets
CCML_DEFINE_ERROR(ManifestError);
CCML_DEFINE_ERROR(VocabularyError);
CCML_DEFINE_ERROR(SpecError);

// training / evaluation / transfer
CCML_DEFINE_ERROR(DataError);
CCML_DEFINE_ERROR(TrainingFault);
CCML_DEFINE_ERROR(VocabError);
CCML_DEFINE_ERROR(TransferError);

// analysis
CCML_DEFINE_ERROR(RegistryConflict);
CCML_DEFINE_ERROR(MissingCell);

#undef CCML_DEFINE_ERROR

}  // namespace ccml
