#include "jenn/emulator.hpp"

#include "jenn/error.hpp"

namespace jenn {

MlpEmulator::MlpEmulator(MlpParams params) : params_(std::move(params)) {
    const auto& arch = params_.architecture();
    if (arch.input_dim != arch.output_dim) {
        throw ConfigError("MlpEmulator: a state emulator needs input_dim == output_dim");
    }
}

StateVector MlpEmulator::predict(const StateVector& x) const { return jenn::predict(params_, x); }

StateVector MlpEmulator::tangent(const StateVector& x, const StateVector& dx) const {
    return jvp(params_, forward(params_, x).second, dx);
}

StateVector MlpEmulator::adjoint(const StateVector& x, const StateVector& yhat) const {
    return vjp(params_, forward(params_, x).second, yhat);
}

JacobianMatrix MlpEmulator::jacobian(const StateVector& x) const { return extract_jacobian(params_, x); }

PhysicsEmulator::PhysicsEmulator(Lorenz96Config cfg) : cfg_(cfg) { cfg_.validate(); }

StateVector PhysicsEmulator::predict(const StateVector& x) const { return lorenz96::step_rk4(cfg_, x); }

StateVector PhysicsEmulator::tangent(const StateVector& x, const StateVector& dx) const {
    return lorenz96::step_tlm(cfg_, x, dx);
}

StateVector PhysicsEmulator::adjoint(const StateVector& x, const StateVector& yhat) const {
    return lorenz96::step_adj(cfg_, x, yhat);
}

JacobianMatrix PhysicsEmulator::jacobian(const StateVector& x) const {
    return lorenz96::reference_jacobian(cfg_, x);
}

} // namespace jenn
