#include "run_config.hpp"

#include <jenn/container.hpp>
#include <jenn/error.hpp>

#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

namespace jenn::cli {

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
    }
    return value;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view text) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        out.push_back(parse_number<int>(key, text.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

struct Field {
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number_field(T ExperimentConfig::*member) {
    return {[member](RunConfig& c, std::string_view k, std::string_view v) {
                c.experiment.*member = parse_number<T>(k, v);
            },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return format_real(c.experiment.*member);
                } else {
                    return std::to_string(c.experiment.*member);
                }
            }};
}

template <class S, class T>
Field nested_field(S ExperimentConfig::*outer, T S::*member) {
    return {[outer, member](RunConfig& c, std::string_view k, std::string_view v) {
                (c.experiment.*outer).*member = parse_number<T>(k, v);
            },
            [outer, member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return format_real((c.experiment.*outer).*member);
                } else {
                    return std::to_string((c.experiment.*outer).*member);
                }
            }};
}

Field path_field(std::string RunConfig::*member) {
    return {[member](RunConfig& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
            [member](const RunConfig& c) { return c.*member; }};
}

// Both optimizer phases share memory and tolerances; only the caps differ.
template <class T>
Field lbfgs_field(T LbfgsConfig::*member) {
    return {[member](RunConfig& c, std::string_view k, std::string_view v) {
                const T value = parse_number<T>(k, v);
                c.experiment.phase1.*member = value;
                c.experiment.phase2.*member = value;
            },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return format_real(c.experiment.phase1.*member);
                } else {
                    return std::to_string(c.experiment.phase1.*member);
                }
            }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
    using E = ExperimentConfig;
    static const std::vector<std::pair<std::string, Field>> table = {
        {"n", nested_field(&E::physics, &Lorenz96Config::n)},
        {"forcing", nested_field(&E::physics, &Lorenz96Config::forcing)},
        {"dt", nested_field(&E::physics, &Lorenz96Config::dt)},
        {"spinup_time", number_field(&E::spinup_time)},
        {"sample_time", number_field(&E::sample_time)},
        {"holdout_fraction", number_field(&E::holdout_fraction)},
        {"hidden_dims",
         {[](RunConfig& c, std::string_view k, std::string_view v) { c.experiment.hidden_dims = parse_int_list(k, v); },
          [](const RunConfig& c) { return join(c.experiment.hidden_dims); }}},
        {"subset_size", number_field(&E::subset_size)},
        {"sensitivity_count", number_field(&E::sensitivity_count)},
        {"eval_sensitivity_count", number_field(&E::eval_sensitivity_count)},
        {"eval_jacobian_states", number_field(&E::eval_jacobian_states)},
        {"perturbation_mode",
         {[](RunConfig& c, std::string_view, std::string_view v) {
              c.experiment.mode = perturbation_mode_from_string(v);
          },
          [](const RunConfig& c) { return std::string(to_string(c.experiment.mode)); }}},
        {"rel_scale", number_field(&E::rel_scale)},
        {"alpha", nested_field(&E::weights, &LossWeights::alpha)},
        {"beta", nested_field(&E::weights, &LossWeights::beta)},
        {"gamma", nested_field(&E::weights, &LossWeights::gamma)},
        {"phase1_max_iters", nested_field(&E::phase1, &LbfgsConfig::max_iters)},
        {"phase2_max_iters", nested_field(&E::phase2, &LbfgsConfig::max_iters)},
        {"lbfgs_memory", lbfgs_field(&LbfgsConfig::memory)},
        {"grad_tol", lbfgs_field(&LbfgsConfig::grad_tol)},
        {"loss_tol", lbfgs_field(&LbfgsConfig::loss_tol)},
        {"seed", number_field(&E::seed)},
        {"data", path_field(&RunConfig::data)},
        {"sensitivity", path_field(&RunConfig::sensitivity)},
        {"phase1_checkpoint", path_field(&RunConfig::phase1_checkpoint)},
        {"out", path_field(&RunConfig::out)},
    };
    return table;
}

} // namespace

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, field] : fields()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(cfg, key, value);
            return;
        }
    }
    throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

std::string to_text(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [name, field] : fields()) {
        entries.emplace_back(name, field.get(cfg));
    }
    return format_key_values(entries);
}

RunConfig run_config_from_text(const std::string& text, RunConfig base) {
    std::vector<std::pair<std::string, std::string>> entries;
    try {
        entries = parse_key_values(text);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    std::set<std::string> seen;
    for (const auto& [key, value] : entries) {
        if (!seen.insert(key).second) {
            throw ConfigError(fmt::format("configuration key '{}' appears twice", key));
        }
        apply_setting(base, key, value);
    }
    return base;
}

void RunConfig::validate() const {
    experiment.validate();
    std::map<std::string, std::string> used;
    for (const auto& [name, path] : {std::pair{"data", &data}, std::pair{"sensitivity", &sensitivity},
                                     std::pair{"phase1_checkpoint", &phase1_checkpoint}, std::pair{"out", &out}}) {
        if (path->empty()) {
            continue;
        }
        const std::string norm = std::filesystem::path(*path).lexically_normal().string();
        if (const auto it = used.find(norm); it != used.end()) {
            throw ConfigError(fmt::format("paths '{}' and '{}' must differ", it->second, name));
        }
        used.emplace(norm, name);
    }
}

} // namespace jenn::cli
