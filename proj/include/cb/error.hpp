#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cb {

enum class Errc {
  invalid_spec,
  invalid_argument,
  template_error,
  submit_failed,
  queue_closed,
  unknown_handle,
  empty_input,
  invalid_point,
  storage_full,
  parse_error,
  invalid_query,
  storage_error,
  unknown_record,
  duplicate_link,
  self_link,
  unknown_collection,
  collection_cycle,
  unknown_bandwidth_kind,
  zero_bound,
  zero_total,
  insufficient_data,
  length_mismatch,
  nonpositive_density,
  instability,
  subcritical_tau,
  no_jobs,
  store_unavailable,
  not_found,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Thrown by the line-protocol and config parsers. `offset` is the byte
// position within the offending input.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(Errc::parse_error, what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Raised by the LBM stepper when a population becomes non-finite.
class InstabilityError : public Error {
 public:
  InstabilityError(long step, const std::string& what)
      : Error(Errc::instability, what + " at step " + std::to_string(step)), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace cb
