#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ubss {

enum class Errc {
  file_too_short,
  dimensions_zero,
  unknown_format,
  n_not_perfect_square,
  inconsistent_dimensions,
  dimension_mismatch,
  io_failure,
  invalid_shape,
  shape_mismatch,
  out_of_grid,
  out_of_order,
  incomplete_group,
  negative_threshold,
  non_finite,
  dimension_not_divisible,
  empty_input,
  invalid_config,
  bad_magic,
  unsupported_version,
  truncated_payload,
  unknown_generator,
  invalid_header,
};

/// Stable kebab-case name, used as the machine-greppable CLI reason.
constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::file_too_short: return "file-too-short";
    case Errc::dimensions_zero: return "dimensions-zero";
    case Errc::unknown_format: return "unknown-format";
    case Errc::n_not_perfect_square: return "n-not-perfect-square";
    case Errc::inconsistent_dimensions: return "inconsistent-dimensions";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::io_failure: return "io-failure";
    case Errc::invalid_shape: return "invalid-shape";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::out_of_grid: return "out-of-grid";
    case Errc::out_of_order: return "out-of-order";
    case Errc::incomplete_group: return "incomplete-group";
    case Errc::negative_threshold: return "negative-threshold";
    case Errc::non_finite: return "non-finite";
    case Errc::dimension_not_divisible: return "dimension-not-divisible";
    case Errc::empty_input: return "empty-input";
    case Errc::invalid_config: return "invalid-config";
    case Errc::bad_magic: return "bad-magic";
    case Errc::unsupported_version: return "unsupported-version";
    case Errc::truncated_payload: return "truncated-payload";
    case Errc::unknown_generator: return "unknown-generator";
    case Errc::invalid_header: return "invalid-header";
  }
  return "unknown-error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ubss
