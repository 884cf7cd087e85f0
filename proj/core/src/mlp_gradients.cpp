// Batched loss gradients for the tanh MLP.
//
// Notation per chunk of samples (one per column), layers k = 0..L-1:
//   a[0] = x,  z[k] = W[k] a[k] + b[k],  a[k+1] = tanh(z[k]) (k < L-1),
//   y = z[L-1],  s[k] = 1 - a[k+1]^2 = tanh'(z[k]),
//   ds[k]/dz[k] = tanh''(z[k]) = -2 a[k+1] s[k].
// Tangent pass:  t[0] = dx,  u[k] = W[k] t[k],  t[k+1] = s[k] u[k],  dy = W[L-1] t[L-1].
// Adjoint pass:  w[L-1] = W[L-1]^T yhat,  q[k] = s[k] w[k+1],  w[k] = W[k]^T q[k],  xhat = w[0].

#include "jenn/error.hpp"
#include "jenn/mlp.hpp"
#include "jenn/parallel.hpp"

#include <fmt/format.h>

#include <cmath>
#include <vector>

namespace jenn {

namespace {

constexpr Eigen::Index kChunkColumns = 256;

struct BatchForward {
    std::vector<Matrix> a; // a[0] = input, a[k+1] = tanh(z[k]) for hidden k
    std::vector<Matrix> s; // tanh'(z[k]) for hidden k
    Matrix y;
};

BatchForward batch_forward(const MlpParams& params, const Eigen::Ref<const Matrix>& x) {
    const int layers = params.architecture().layer_count();
    BatchForward fw;
    fw.a.reserve(static_cast<std::size_t>(layers));
    fw.s.reserve(static_cast<std::size_t>(layers - 1));
    fw.a.emplace_back(x);
    for (int k = 0; k < layers; ++k) {
        const auto& layer = params.layer(k);
        Matrix z = layer.weight * fw.a.back();
        z.colwise() += layer.bias;
        if (k + 1 < layers) {
            Matrix a = z.array().tanh().matrix();
            fw.s.emplace_back((1.0 - a.array().square()).matrix());
            fw.a.push_back(std::move(a));
        } else {
            fw.y = std::move(z);
        }
    }
    return fw;
}

// Per-sample RMSE of the residual columns. Returns the RMSE sum and writes
// d(sum)/d(residual) into `seed`.
double rmse_seed(const Matrix& residual, Matrix& seed) {
    const double n = static_cast<double>(residual.rows());
    seed.resize(residual.rows(), residual.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < residual.cols(); ++j) {
        const double rmse = residual.col(j).norm() / std::sqrt(n);
        total += rmse;
        if (rmse > kRmseGradientFloor) {
            seed.col(j) = residual.col(j) / (n * rmse);
        } else {
            seed.col(j).setZero();
        }
    }
    return total;
}

double rmse_sum(const Matrix& residual) {
    const double n = static_cast<double>(residual.rows());
    double total = 0.0;
    for (Eigen::Index j = 0; j < residual.cols(); ++j) {
        total += residual.col(j).norm() / std::sqrt(n);
    }
    return total;
}

void check_batch(const MlpParams& params, const char* name, Eigen::Index cols,
                 std::initializer_list<std::pair<const Matrix*, int>> parts) {
    if (cols == 0) {
        throw ShapeError(fmt::format("{}: empty batch", name));
    }
    for (const auto& [m, rows] : parts) {
        if (m->cols() != cols || m->rows() != rows) {
            throw ShapeError(fmt::format("{}: batch block is {}x{}, expected {}x{}", name, m->rows(),
                                         m->cols(), rows, cols));
        }
    }
    if (!params.all_finite()) {
        throw NumericalError(fmt::format("{}: parameters contain non-finite values", name));
    }
}

// Runs `chunk(begin, count, grad_or_null)` over fixed-size column chunks and
// reduces in chunk order, so results do not depend on the thread count.
template <class ChunkFn>
LossGradient reduce_over_chunks(const MlpParams& params, Eigen::Index samples, bool want_grad,
                                ChunkFn&& chunk) {
    const auto chunks = static_cast<std::size_t>((samples + kChunkColumns - 1) / kChunkColumns);
    std::vector<double> losses(chunks, 0.0);
    std::vector<MlpParams> grads;
    if (want_grad) {
        grads.assign(chunks, MlpParams(params.architecture()));
    }
    parallel_for(chunks, [&](std::size_t c) {
        const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunkColumns;
        const Eigen::Index count = std::min(kChunkColumns, samples - begin);
        losses[c] = chunk(begin, count, want_grad ? &grads[c] : nullptr);
    });

    LossGradient out;
    const double inv = 1.0 / static_cast<double>(samples);
    for (const double l : losses) {
        out.loss += l;
    }
    out.loss *= inv;
    if (want_grad) {
        out.grad = Vector::Zero(params.architecture().parameter_count());
        for (const auto& g : grads) {
            out.grad += g.flatten();
        }
        out.grad *= inv;
    }
    if (!std::isfinite(out.loss) || (want_grad && !out.grad.allFinite())) {
        throw NumericalError("mlp: loss or gradient is not finite");
    }
    return out;
}

// Standard backprop of an output seed through the state pass, plus optional
// extra seeds on hidden pre-activations (z_seed[k], may be empty).
void backprop_state(const MlpParams& params, const BatchForward& fw, const Matrix* output_seed,
                    const std::vector<Matrix>& z_seed, MlpParams& grad) {
    const int last = params.architecture().layer_count() - 1;
    Matrix abar;
    if (output_seed != nullptr) {
        grad.layer(last).weight.noalias() += *output_seed * fw.a[static_cast<std::size_t>(last)].transpose();
        grad.layer(last).bias += output_seed->rowwise().sum();
        abar.noalias() = params.layer(last).weight.transpose() * *output_seed;
    }
    for (int k = last - 1; k >= 0; --k) {
        const auto idx = static_cast<std::size_t>(k);
        Matrix zbar;
        if (abar.size() != 0) {
            zbar = fw.s[idx].cwiseProduct(abar);
            if (!z_seed.empty()) {
                zbar += z_seed[idx];
            }
        } else if (!z_seed.empty()) {
            zbar = z_seed[idx];
        } else {
            return;
        }
        grad.layer(k).weight.noalias() += zbar * fw.a[idx].transpose();
        grad.layer(k).bias += zbar.rowwise().sum();
        if (k > 0) {
            abar.noalias() = params.layer(k).weight.transpose() * zbar;
        }
    }
}

LossGradient forecast_impl(const MlpParams& params, const ForecastBatch& batch, bool want_grad) {
    const auto& arch = params.architecture();
    check_batch(params, "grad_forecast_loss", batch.size(),
                {{&batch.x, arch.input_dim}, {&batch.y_true, arch.output_dim}});
    return reduce_over_chunks(params, batch.size(), want_grad,
                              [&](Eigen::Index begin, Eigen::Index count, MlpParams* grad) {
        const BatchForward fw = batch_forward(params, batch.x.middleCols(begin, count));
        const Matrix residual = fw.y - batch.y_true.middleCols(begin, count);
        if (grad == nullptr) {
            return rmse_sum(residual);
        }
        Matrix seed;
        const double loss = rmse_seed(residual, seed);
        backprop_state(params, fw, &seed, {}, *grad);
        return loss;
    });
}

LossGradient tlm_impl(const MlpParams& params, const TangentBatch& batch, bool want_grad) {
    const auto& arch = params.architecture();
    check_batch(params, "grad_tlm_loss", batch.size(),
                {{&batch.x, arch.input_dim}, {&batch.dx, arch.input_dim}, {&batch.dy_true, arch.output_dim}});
    const int last = arch.layer_count() - 1;
    return reduce_over_chunks(params, batch.size(), want_grad,
                              [&](Eigen::Index begin, Eigen::Index count, MlpParams* grad) {
        const BatchForward fw = batch_forward(params, batch.x.middleCols(begin, count));

        std::vector<Matrix> t; // t[k] feeds layer k
        std::vector<Matrix> u; // u[k] = W[k] t[k] for hidden k
        t.reserve(static_cast<std::size_t>(last + 1));
        u.reserve(static_cast<std::size_t>(last));
        t.emplace_back(batch.dx.middleCols(begin, count));
        for (int k = 0; k < last; ++k) {
            const auto idx = static_cast<std::size_t>(k);
            u.emplace_back(params.layer(k).weight * t[idx]);
            t.emplace_back(fw.s[idx].cwiseProduct(u[idx]));
        }
        const Matrix dy = params.layer(last).weight * t.back();
        const Matrix residual = dy - batch.dy_true.middleCols(begin, count);
        if (grad == nullptr) {
            return rmse_sum(residual);
        }
        Matrix seed;
        const double loss = rmse_seed(residual, seed);

        // dy = W[L-1] t[L-1]; the output bias does not reach dy.
        grad->layer(last).weight.noalias() += seed * t.back().transpose();
        Matrix tbar = params.layer(last).weight.transpose() * seed;
        Matrix abar; // empty: the state output y is not part of this loss
        for (int k = last - 1; k >= 0; --k) {
            const auto idx = static_cast<std::size_t>(k);
            const Matrix& s = fw.s[idx];
            const Matrix& a_next = fw.a[idx + 1];
            // t[k+1] = s[k] * u[k]: split the adjoint between u and s(z).
            const Matrix ubar = s.cwiseProduct(tbar);
            Matrix zbar = (u[idx].cwiseProduct(tbar)).cwiseProduct((-2.0 * a_next.array() * s.array()).matrix());
            if (abar.size() != 0) {
                zbar += s.cwiseProduct(abar);
            }
            grad->layer(k).weight.noalias() += zbar * fw.a[idx].transpose();
            grad->layer(k).weight.noalias() += ubar * t[idx].transpose();
            grad->layer(k).bias += zbar.rowwise().sum();
            if (k > 0) {
                abar.noalias() = params.layer(k).weight.transpose() * zbar;
                tbar.noalias() = params.layer(k).weight.transpose() * ubar;
            }
        }
        return loss;
    });
}

LossGradient adj_impl(const MlpParams& params, const AdjointBatch& batch, bool want_grad) {
    const auto& arch = params.architecture();
    check_batch(params, "grad_adj_loss", batch.size(),
                {{&batch.x, arch.input_dim}, {&batch.yhat, arch.output_dim}, {&batch.xhat_true, arch.input_dim}});
    const int last = arch.layer_count() - 1;
    return reduce_over_chunks(params, batch.size(), want_grad,
                              [&](Eigen::Index begin, Eigen::Index count, MlpParams* grad) {
        const BatchForward fw = batch_forward(params, batch.x.middleCols(begin, count));
        const auto yhat = batch.yhat.middleCols(begin, count);

        std::vector<Matrix> w(static_cast<std::size_t>(last + 1)); // w[k]: adjoint of a[k]
        std::vector<Matrix> q(static_cast<std::size_t>(last));     // q[k]: adjoint of z[k]
        w[static_cast<std::size_t>(last)] = params.layer(last).weight.transpose() * yhat;
        for (int k = last - 1; k >= 0; --k) {
            const auto idx = static_cast<std::size_t>(k);
            q[idx] = fw.s[idx].cwiseProduct(w[idx + 1]);
            w[idx] = params.layer(k).weight.transpose() * q[idx];
        }
        const Matrix residual = w[0] - batch.xhat_true.middleCols(begin, count);
        if (grad == nullptr) {
            return rmse_sum(residual);
        }
        Matrix seed;
        const double loss = rmse_seed(residual, seed);

        // Reverse of the adjoint sweep runs in forward layer order.
        Matrix hbar = seed; // adjoint of w[k]
        std::vector<Matrix> z_seed(static_cast<std::size_t>(last));
        for (int k = 0; k < last; ++k) {
            const auto idx = static_cast<std::size_t>(k);
            // w[k] = W[k]^T q[k]
            grad->layer(k).weight.noalias() += q[idx] * hbar.transpose();
            const Matrix qbar = params.layer(k).weight * hbar;
            // q[k] = s[k] * w[k+1]
            z_seed[idx] = (w[idx + 1].cwiseProduct(qbar))
                              .cwiseProduct((-2.0 * fw.a[idx + 1].array() * fw.s[idx].array()).matrix());
            hbar = fw.s[idx].cwiseProduct(qbar);
        }
        // w[L-1] = W[L-1]^T yhat
        grad->layer(last).weight.noalias() += yhat * hbar.transpose();

        // The s[k] dependence feeds back into the state pass through z[k].
        backprop_state(params, fw, nullptr, z_seed, *grad);
        return loss;
    });
}

} // namespace

LossGradient grad_forecast_loss(const MlpParams& params, const ForecastBatch& batch) {
    return forecast_impl(params, batch, true);
}

LossGradient grad_tlm_loss(const MlpParams& params, const TangentBatch& batch) {
    return tlm_impl(params, batch, true);
}

LossGradient grad_adj_loss(const MlpParams& params, const AdjointBatch& batch) {
    return adj_impl(params, batch, true);
}

double forecast_loss(const MlpParams& params, const ForecastBatch& batch) {
    return forecast_impl(params, batch, false).loss;
}

double tlm_loss(const MlpParams& params, const TangentBatch& batch) {
    return tlm_impl(params, batch, false).loss;
}

double adj_loss(const MlpParams& params, const AdjointBatch& batch) {
    return adj_impl(params, batch, false).loss;
}

} // namespace jenn
