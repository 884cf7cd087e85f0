#pragma once

#include <jenn/training.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace jenn::cli {

/// Everything a run needs, serializable as "key = value" lines.
struct RunConfig {
    ExperimentConfig experiment{};
    std::string data;              ///< trajectory file
    std::string sensitivity;       ///< optional sensitivity file for phase 2
    std::string phase1_checkpoint; ///< required when training phase 2 alone
    std::string out;               ///< output directory

    /// Sub-configs valid and all non-empty paths distinct.
    void validate() const;
};

/// Keys accepted by apply_setting, in serialization order.
const std::vector<std::string>& run_config_keys();

/// Sets one key from its text form. Throws ConfigError on an unknown key or
/// malformed value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

std::string to_text(const RunConfig& cfg);

/// Applies every entry of `text` on top of `base`.
RunConfig run_config_from_text(const std::string& text, RunConfig base = {});

} // namespace jenn::cli
