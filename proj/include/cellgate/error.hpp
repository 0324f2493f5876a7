#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cellgate {

enum class Errc {
  invalid_argument,
  timeout,
  transport_closed,
  prompt_never_arrived,
  command_failed,
  unmappable_character,
  length_mismatch,
  message_too_long,
  invalid_digit,
  truncated,
  bad_hex,
  unsupported_dcs,
  missing_mandatory_header,
  unknown_message_type,
  http_failure,
  mmsc_status,
  decode_failure,
  content_location_gone,
  invalid_state,
  modem_busy,
  invalid_number,
  not_ready,
  capability_missing,
  not_found,
  conflict,
  unauthorized,
  sim_pin_required,
  sim_puk,
  init_failed,
  storage_full,
  text_too_long,
  invalid_index,
  expired,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace cellgate
