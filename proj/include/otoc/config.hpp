#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "otoc/synth.hpp"
#include "otoc/train_config.hpp"

namespace otoc {

/// Everything a CLI run can configure.
struct RunConfig {
  TrainConfig train;
  SynthSpec synth;
  std::uint64_t seed = 0;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys throw ValidationError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

const char* mode_name(PropagationMode mode);

}  // namespace otoc
