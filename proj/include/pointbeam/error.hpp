#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pointbeam {

enum class Errc {
    invalid_spec,
    out_of_range,
    incompatible_buffers,
    invalid_input,
    insufficient_data,
    insufficient_mics,
    consistency_failure,
    nothing_to_enhance,
    parse_error,
    validation_error,
    placement_error,
    invalid_baseline,
    io_error,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_spec:         return "invalid-spec";
        case Errc::out_of_range:         return "out-of-range";
        case Errc::incompatible_buffers: return "incompatible-buffers";
        case Errc::invalid_input:        return "invalid-input";
        case Errc::insufficient_data:    return "insufficient-data";
        case Errc::insufficient_mics:    return "insufficient-mics";
        case Errc::consistency_failure:  return "consistency-failure";
        case Errc::nothing_to_enhance:   return "nothing-to-enhance";
        case Errc::parse_error:          return "parse-error";
        case Errc::validation_error:     return "validation-error";
        case Errc::placement_error:      return "placement-error";
        case Errc::invalid_baseline:     return "invalid-baseline";
        case Errc::io_error:             return "io-error";
    }
    return "unknown";
}

// All failures carry the pipeline stage that raised them so CLI diagnostics
// can say where a run died instead of just why.
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string stage, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + " [" + stage + "]: " + what),
          code_(code),
          stage_(std::move(stage)) {}

    Errc code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    Errc code_;
    std::string stage_;
};

[[noreturn]] inline void fail(Errc code, const std::string& stage, const std::string& what) {
    throw Error(code, stage, what);
}

} // namespace pointbeam
