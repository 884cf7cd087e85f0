#pragma once

#include "jenn/lorenz96.hpp"
#include "jenn/mlp.hpp"
#include "jenn/types.hpp"

#include <string>

namespace jenn {

/// Anything that maps x(t) to x(t + dt) and exposes its tangent linear and
/// adjoint. Implementations are immutable and safe to share across threads.
class Emulator {
  public:
    virtual ~Emulator() = default;

    virtual int dim() const = 0;
    virtual std::string name() const = 0;
    virtual StateVector predict(const StateVector& x) const = 0;
    virtual StateVector tangent(const StateVector& x, const StateVector& dx) const = 0;
    virtual StateVector adjoint(const StateVector& x, const StateVector& yhat) const = 0;
    virtual JacobianMatrix jacobian(const StateVector& x) const = 0;
};

/// The trained network.
class MlpEmulator final : public Emulator {
  public:
    explicit MlpEmulator(MlpParams params);

    int dim() const override { return params_.architecture().input_dim; }
    std::string name() const override { return "mlp"; }
    StateVector predict(const StateVector& x) const override;
    StateVector tangent(const StateVector& x, const StateVector& dx) const override;
    StateVector adjoint(const StateVector& x, const StateVector& yhat) const override;
    JacobianMatrix jacobian(const StateVector& x) const override;

    const MlpParams& params() const { return params_; }

  private:
    MlpParams params_;
};

/// The physics core posing as an emulator; a perfect reference.
class PhysicsEmulator final : public Emulator {
  public:
    explicit PhysicsEmulator(Lorenz96Config cfg);

    int dim() const override { return cfg_.n; }
    std::string name() const override { return "lorenz96"; }
    StateVector predict(const StateVector& x) const override;
    StateVector tangent(const StateVector& x, const StateVector& dx) const override;
    StateVector adjoint(const StateVector& x, const StateVector& yhat) const override;
    JacobianMatrix jacobian(const StateVector& x) const override;

    const Lorenz96Config& config() const { return cfg_; }

  private:
    Lorenz96Config cfg_;
};

} // namespace jenn
