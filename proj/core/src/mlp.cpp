#include "jenn/mlp.hpp"

#include "jenn/error.hpp"
#include "jenn/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace jenn {

std::string_view to_string(Activation activation) {
    switch (activation) {
    case Activation::tanh:
        return "tanh";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") {
        return Activation::tanh;
    }
    throw ConfigError(fmt::format("unknown activation '{}'", name));
}

MlpArchitecture MlpArchitecture::state_map(int n, std::vector<int> hidden_dims) {
    MlpArchitecture arch;
    arch.input_dim = n;
    arch.output_dim = n;
    arch.hidden_dims = std::move(hidden_dims);
    arch.validate();
    return arch;
}

void MlpArchitecture::validate() const {
    if (input_dim <= 0 || output_dim <= 0) {
        throw ConfigError("MlpArchitecture: input and output dimensions must be positive");
    }
    if (hidden_dims.empty()) {
        throw ConfigError("MlpArchitecture: at least one hidden layer is required");
    }
    for (const int width : hidden_dims) {
        if (width <= 0) {
            throw ConfigError("MlpArchitecture: hidden widths must be positive");
        }
    }
}

int MlpArchitecture::layer_inputs(int layer) const {
    return layer == 0 ? input_dim : hidden_dims.at(static_cast<std::size_t>(layer - 1));
}

int MlpArchitecture::layer_outputs(int layer) const {
    return layer == layer_count() - 1 ? output_dim : hidden_dims.at(static_cast<std::size_t>(layer));
}

Eigen::Index MlpArchitecture::parameter_count() const {
    Eigen::Index total = 0;
    for (int l = 0; l < layer_count(); ++l) {
        total += static_cast<Eigen::Index>(layer_outputs(l)) * (layer_inputs(l) + 1);
    }
    return total;
}

MlpParams::MlpParams(MlpArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    layers_.reserve(static_cast<std::size_t>(arch_.layer_count()));
    for (int l = 0; l < arch_.layer_count(); ++l) {
        layers_.push_back({Matrix::Zero(arch_.layer_outputs(l), arch_.layer_inputs(l)),
                           Vector::Zero(arch_.layer_outputs(l))});
    }
}

MlpParams MlpParams::unflatten(const MlpArchitecture& arch, std::span<const double> flat) {
    MlpParams params(arch);
    if (static_cast<Eigen::Index>(flat.size()) != arch.parameter_count()) {
        throw ShapeError(fmt::format("MlpParams::unflatten: got {} values, architecture needs {}",
                                     flat.size(), arch.parameter_count()));
    }
    std::size_t pos = 0;
    for (auto& layer : params.layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = flat[pos++];
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            layer.bias[r] = flat[pos++];
        }
    }
    return params;
}

Vector MlpParams::flatten() const {
    Vector flat(arch_.parameter_count());
    Eigen::Index pos = 0;
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                flat[pos++] = layer.weight(r, c);
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            flat[pos++] = layer.bias[r];
        }
    }
    return flat;
}

bool MlpParams::all_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

bool MlpParams::operator==(const MlpParams& other) const {
    if (!(arch_ == other.arch_)) {
        return false;
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) {
            return false;
        }
    }
    return true;
}

MlpParams init_params(const MlpArchitecture& arch, Seed seed) {
    MlpParams params(arch);
    Rng rng(seed);
    for (auto& layer : params.layers()) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        // Row-major fill so the draw order matches the flat layout.
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = rng.uniform(-bound, bound);
            }
        }
    }
    return params;
}

namespace {

void check_input(const StateVector& v, int expected, const char* what) {
    if (v.size() != expected) {
        throw ShapeError(fmt::format("mlp: {} has length {}, expected {}", what, v.size(), expected));
    }
}

void check_trace(const MlpParams& params, const ForwardTrace& trace) {
    const auto& arch = params.architecture();
    const auto layers = static_cast<std::size_t>(arch.layer_count());
    if (trace.pre_activations.size() != layers || trace.activations.size() != layers) {
        throw ShapeError("mlp: forward trace layer count does not match the parameters");
    }
    for (int l = 0; l < arch.layer_count(); ++l) {
        const auto idx = static_cast<std::size_t>(l);
        if (trace.activations[idx].size() != arch.layer_inputs(l)
            || trace.pre_activations[idx].size() != arch.layer_outputs(l)) {
            throw ShapeError(fmt::format("mlp: forward trace layer {} has mismatched shapes", l));
        }
    }
}

} // namespace

std::pair<StateVector, ForwardTrace> forward(const MlpParams& params, const StateVector& x) {
    const auto& arch = params.architecture();
    check_input(x, arch.input_dim, "input");
    ForwardTrace trace;
    const int layers = arch.layer_count();
    trace.pre_activations.reserve(static_cast<std::size_t>(layers));
    trace.activations.reserve(static_cast<std::size_t>(layers));
    trace.activations.push_back(x);
    for (int l = 0; l < layers; ++l) {
        const auto& layer = params.layer(l);
        trace.pre_activations.push_back(layer.weight * trace.activations.back() + layer.bias);
        if (l + 1 < layers) {
            trace.activations.push_back(trace.pre_activations.back().array().tanh().matrix());
        }
    }
    StateVector y = trace.pre_activations.back();
    return {std::move(y), std::move(trace)};
}

StateVector predict(const MlpParams& params, const StateVector& x) {
    const auto& arch = params.architecture();
    check_input(x, arch.input_dim, "input");
    Vector a = x;
    const int layers = arch.layer_count();
    for (int l = 0; l + 1 < layers; ++l) {
        a = (params.layer(l).weight * a + params.layer(l).bias).array().tanh().matrix();
    }
    return params.layer(layers - 1).weight * a + params.layer(layers - 1).bias;
}

StateVector jvp(const MlpParams& params, const ForwardTrace& trace, const StateVector& dx) {
    const auto& arch = params.architecture();
    check_trace(params, trace);
    check_input(dx, arch.input_dim, "tangent input");
    Vector t = dx;
    const int layers = arch.layer_count();
    for (int l = 0; l + 1 < layers; ++l) {
        const auto& a = trace.activations[static_cast<std::size_t>(l + 1)];
        t = (1.0 - a.array().square()).matrix().cwiseProduct(params.layer(l).weight * t);
    }
    return params.layer(layers - 1).weight * t;
}

StateVector vjp(const MlpParams& params, const ForwardTrace& trace, const StateVector& yhat) {
    const auto& arch = params.architecture();
    check_trace(params, trace);
    check_input(yhat, arch.output_dim, "adjoint input");
    const int layers = arch.layer_count();
    Vector w = params.layer(layers - 1).weight.transpose() * yhat;
    for (int l = layers - 2; l >= 0; --l) {
        const auto& a = trace.activations[static_cast<std::size_t>(l + 1)];
        w = params.layer(l).weight.transpose() * (1.0 - a.array().square()).matrix().cwiseProduct(w);
    }
    return w;
}

JacobianMatrix extract_jacobian(const MlpParams& params, const StateVector& x) {
    const auto& arch = params.architecture();
    const auto trace = forward(params, x).second;
    JacobianMatrix jac(arch.output_dim, arch.input_dim);
    Vector basis = Vector::Zero(arch.input_dim);
    for (int j = 0; j < arch.input_dim; ++j) {
        basis[j] = 1.0;
        jac.col(j) = jvp(params, trace, basis);
        basis[j] = 0.0;
    }
    return jac;
}

JacobianMatrix extract_jacobian_reverse(const MlpParams& params, const StateVector& x) {
    const auto& arch = params.architecture();
    const auto trace = forward(params, x).second;
    JacobianMatrix jac(arch.output_dim, arch.input_dim);
    Vector basis = Vector::Zero(arch.output_dim);
    for (int i = 0; i < arch.output_dim; ++i) {
        basis[i] = 1.0;
        jac.row(i) = vjp(params, trace, basis).transpose();
        basis[i] = 0.0;
    }
    return jac;
}

} // namespace jenn
