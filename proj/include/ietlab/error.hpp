#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ietlab {

enum class Errc {
  NonPositiveLength,
  InvalidPermutation,
  ReduciblePermutation,
  OutOfDomain,
  IncompatiblePartition,
  KeaneDegenerate,
  BlockOverflow,
  NoSecondExponent,
  DimensionMismatch,
  NonZeroMean,
  NonPositiveHeight,
  InvalidSuspension,
  EmptySample,
  DegenerateVariance,
  DegenerateObservable,
  InvalidArgument,
  ConfigError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveLength: return "NonPositiveLength";
    case Errc::InvalidPermutation: return "InvalidPermutation";
    case Errc::ReduciblePermutation: return "ReduciblePermutation";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::IncompatiblePartition: return "IncompatiblePartition";
    case Errc::KeaneDegenerate: return "KeaneDegenerate";
    case Errc::BlockOverflow: return "BlockOverflow";
    case Errc::NoSecondExponent: return "NoSecondExponent";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonZeroMean: return "NonZeroMean";
    case Errc::NonPositiveHeight: return "NonPositiveHeight";
    case Errc::InvalidSuspension: return "InvalidSuspension";
    case Errc::EmptySample: return "EmptySample";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::DegenerateObservable: return "DegenerateObservable";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ietlab
