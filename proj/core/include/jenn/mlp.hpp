#pragma once

#include "jenn/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jenn {

enum class Activation { tanh };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

/// Fully connected network shape: input -> hidden... (tanh) -> output (linear).
struct MlpArchitecture {
    int input_dim = 40;
    std::vector<int> hidden_dims{256, 256};
    int output_dim = 40;
    Activation hidden_activation = Activation::tanh;

    /// Square state-to-state emulator with the given hidden widths.
    static MlpArchitecture state_map(int n, std::vector<int> hidden_dims);

    void validate() const;

    /// Number of affine layers (hidden layers + output layer).
    int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }
    int layer_inputs(int layer) const;
    int layer_outputs(int layer) const;
    Eigen::Index parameter_count() const;

    bool operator==(const MlpArchitecture&) const = default;
};

struct DenseLayer {
    Matrix weight; ///< outputs x inputs
    Vector bias;
};

/// Weights and biases of an MlpArchitecture.
///
/// Canonical flat ordering, used by the optimizer and the checkpoint payload:
/// layers in forward order; within each layer the weight matrix in row-major
/// order (row = output unit) followed by the bias vector.
class MlpParams {
  public:
    /// All-zero parameters.
    explicit MlpParams(MlpArchitecture arch);

    static MlpParams unflatten(const MlpArchitecture& arch, std::span<const double> flat);
    static MlpParams unflatten(const MlpArchitecture& arch, const Vector& flat) {
        return unflatten(arch, std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
    }

    Vector flatten() const;

    const MlpArchitecture& architecture() const { return arch_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const DenseLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
    DenseLayer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }

    bool all_finite() const;

    bool operator==(const MlpParams& other) const;

  private:
    MlpArchitecture arch_;
    std::vector<DenseLayer> layers_;
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
MlpParams init_params(const MlpArchitecture& arch, Seed seed);

/// Cached intermediates of one forward pass.
/// activations[0] is the input; activations[l + 1] = tanh(pre_activations[l])
/// for hidden layers; pre_activations.back() is the network output.
struct ForwardTrace {
    std::vector<Vector> pre_activations;
    std::vector<Vector> activations;
};

std::pair<StateVector, ForwardTrace> forward(const MlpParams& params, const StateVector& x);

/// forward() without keeping the trace.
StateVector predict(const MlpParams& params, const StateVector& x);

/// Tangent linear emulation: J(x) dx, with x the input recorded in `trace`.
StateVector jvp(const MlpParams& params, const ForwardTrace& trace, const StateVector& dx);

/// Adjoint emulation: J(x)^T yhat.
StateVector vjp(const MlpParams& params, const ForwardTrace& trace, const StateVector& yhat);

/// Network Jacobian at x assembled from input_dim JVPs (column by column).
JacobianMatrix extract_jacobian(const MlpParams& params, const StateVector& x);

/// Network Jacobian at x assembled from output_dim VJPs (row by row).
JacobianMatrix extract_jacobian_reverse(const MlpParams& params, const StateVector& x);

// ---------------------------------------------------------------------------
// Loss gradients. Batches store one sample per column.

/// One-step forecast pairs.
struct ForecastBatch {
    Matrix x;
    Matrix y_true;
    Eigen::Index size() const { return x.cols(); }
};

/// Tangent linear supervision: inputs x, perturbations dx, target responses.
struct TangentBatch {
    Matrix x;
    Matrix dx;
    Matrix dy_true;
    Eigen::Index size() const { return x.cols(); }
};

/// Adjoint supervision: inputs x, output-space sensitivities yhat, targets.
struct AdjointBatch {
    Matrix x;
    Matrix yhat;
    Matrix xhat_true;
    Eigen::Index size() const { return x.cols(); }
};

struct LossGradient {
    double loss = 0.0;
    Vector grad; ///< canonical flat ordering
};

/// Below this per-sample RMSE the sample contributes a zero gradient.
inline constexpr double kRmseGradientFloor = 1e-15;

/// Mean over samples of RMSE(forward(x), y_true) and its exact parameter gradient.
LossGradient grad_forecast_loss(const MlpParams& params, const ForecastBatch& batch);

/// Mean over samples of RMSE(jvp(x, dx), dy_true); gradient by a reverse
/// sweep over the coupled forward and tangent passes.
LossGradient grad_tlm_loss(const MlpParams& params, const TangentBatch& batch);

/// Mean over samples of RMSE(vjp(x, yhat), xhat_true); gradient by
/// differentiating through the adjoint sweep.
LossGradient grad_adj_loss(const MlpParams& params, const AdjointBatch& batch);

/// Loss values only, for evaluation.
double forecast_loss(const MlpParams& params, const ForecastBatch& batch);
double tlm_loss(const MlpParams& params, const TangentBatch& batch);
double adj_loss(const MlpParams& params, const AdjointBatch& batch);

} // namespace jenn
