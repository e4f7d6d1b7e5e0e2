#pragma once

// Analytic backward pass through the spectral hint unit, the central-difference oracle, and the
// planted-weight fitting demo.
//
// Complex gradients follow the real/imaginary convention: the gradient with respect to z = a + ib
// is dL/da + i dL/db.
//
// ParamVector ordering: channel mix first, then filter anchors.
//   complex mix : entries (a, b) row-major, each as (re, im)
//   stacked mix : 2K x 2K real entries row-major
//   anchors     : anchor (r, c) row-major; inside an anchor its K (diagonal) or K*K (row-major)
//                 weights, each as (re, im)

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shint/error.hpp"
#include "shint/fft.hpp"
#include "shint/hefilter.hpp"
#include "shint/random.hpp"
#include "shint/shu.hpp"
#include "shint/tensor.hpp"

namespace shint {

struct ParamVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

inline std::size_t param_count(const ShuParams& p) {
    const std::size_t mix = p.mix.mode() == MixMode::complex_matrix ? 2 * p.mix.channels() * p.mix.channels()
                                                                     : p.mix.dim() * p.mix.dim();
    return mix + 2 * p.hef.anchor_count() * p.hef.anchor_size();
}

inline ParamVector flatten_params(const ChannelMix& mix, const HeFilterParams& hef) {
    ParamVector v;
    if (mix.mode() == MixMode::complex_matrix) {
        for (const auto& w : mix.complex_weights()) {
            v.values.push_back(w.real());
            v.values.push_back(w.imag());
        }
    } else {
        const auto w = mix.real_weights();
        v.values.insert(v.values.end(), w.begin(), w.end());
    }
    for (const auto& w : hef.weights()) {
        v.values.push_back(w.real());
        v.values.push_back(w.imag());
    }
    return v;
}

inline ParamVector flatten_params(const ShuParams& p) { return flatten_params(p.mix, p.hef); }

/// Copy of `shape` with its mix and anchors overwritten from `v`.
inline ShuParams unflatten_params(const ParamVector& v, const ShuParams& shape) {
    if (v.size() != param_count(shape))
        throw ShapeError("param vector has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(param_count(shape)));
    ShuParams p = shape;
    std::size_t n = 0;
    if (p.mix.mode() == MixMode::complex_matrix) {
        for (auto& w : p.mix.complex_weights()) {
            w = {v[n], v[n + 1]};
            n += 2;
        }
    } else {
        for (auto& w : p.mix.real_weights())
            w = v[n++];
    }
    for (auto& w : p.hef.weights()) {
        w = {v[n], v[n + 1]};
        n += 2;
    }
    return p;
}

/// Intermediate spectra of g = hefilter . relu . mix, kept for the backward pass.
struct TransformTrace {
    SpectralTensor input;   // S
    SpectralTensor mixed;   // mix(S)
    SpectralTensor rectified; // relu(mix(S))
};

inline TransformTrace trace_transform(const SpectralTensor& s, const ShuParams& p) {
    auto mixed = channel_mix(s, p.mix);
    auto rect = split_relu(mixed);
    return {s, std::move(mixed), std::move(rect)};
}

struct TransformGrad {
    SpectralTensor input;
    ChannelMix mix;
    HeFilterParams hef;
};

/// Backward through g given dL/dg(S).
inline TransformGrad transform_backward(const TransformTrace& t, const ShuParams& p, const SpectralTensor& upstream) {
    auto hg = hefilter_backward(t.rectified, p.hef, upstream);
    auto rg = split_relu_backward(t.mixed, hg.input);
    auto mg = channel_mix_backward(t.input, p.mix, rg);
    return {std::move(mg.input), std::move(mg.mix), std::move(hg.params)};
}

struct PipelineGrad {
    SpatialTensor input;
    ParamVector params;
};

/// Gradient of a real loss through shu_forward, given dL/dx' as `upstream`.
inline PipelineGrad backward_pipeline(const SpatialTensor& x, const ShuParams& p, const SpatialTensor& upstream) {
    detail::require_shu_input(x, p, "backward_pipeline");
    require_same_shape(x, upstream, "backward_pipeline");
    const std::size_t first = p.first_hint_channel();
    const auto trace = trace_transform(forward_rfft2(x.slice_channels(first, p.hint_channels)), p);
    const auto g = transform_backward(trace, p, irfft2_adjoint(upstream.slice_channels(first, p.hint_channels)));
    const auto gx = rfft2_adjoint(g.input);

    PipelineGrad out{upstream, flatten_params(g.mix, g.hef)};
    auto dst = out.input.data().subspan(first * x.plane_size());
    auto src = gx.data();
    for (std::size_t n = 0; n < src.size(); ++n)
        dst[n] += src[n];
    return out;
}

/// Central differences (L(t + h e_i) - L(t - h e_i)) / 2h for every coordinate.
inline ParamVector finite_diff_oracle(const std::function<double(std::span<const double>)>& loss, const ParamVector& params,
                                      double h) {
    if (!(h > 0.0))
        throw ValueError("finite difference step must be positive");
    std::vector<double> theta = params.values;
    ParamVector grad{std::vector<double>(theta.size())};
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double up = loss(theta);
        theta[i] = orig - h;
        const double down = loss(theta);
        theta[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw ValueError("loss is not finite at coordinate " + std::to_string(i));
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// |a - b| relative to the larger magnitude, the denominator floored at `abs_floor / rel_tol`
/// so that differences below abs_floor always pass a rel_tol check.
inline double gradient_error(double analytic, double numeric, double rel_tol = 1e-6, double abs_floor = 1e-9) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor / rel_tol});
    return std::abs(analytic - numeric) / denom;
}

inline double max_gradient_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double rel_tol = 1e-6, double abs_floor = 1e-9) {
    if (analytic.size() != numeric.size())
        throw ShapeError("gradient length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        m = std::max(m, gradient_error(analytic[i], numeric[i], rel_tol, abs_floor));
    return m;
}

// ---------------------------------------------------------------------------------------------
// planted-weight recovery

enum class FitLoss { l2_spectrum, l2_spatial };

inline FitLoss parse_fit_loss(const std::string& s) {
    if (s == "l2_spectrum")
        return FitLoss::l2_spectrum;
    if (s == "l2_spatial")
        return FitLoss::l2_spatial;
    throw ValueError("unknown fit loss '" + s + "'");
}

struct FitConfig {
    double step_size = 0.1;
    std::size_t steps = 256;
    std::uint64_t seed = 0;
    FitLoss loss = FitLoss::l2_spatial;
    std::size_t height = 16, width = 16;
    std::size_t batch = 4;
    bool train_mix = false; ///< otherwise the mix is frozen at the target's value

    void validate() const {
        if (!(step_size > 0.0) || !std::isfinite(step_size))
            throw ValueError("fit step size must be positive");
        if (steps == 0)
            throw ValueError("fit needs at least one step");
        if (batch == 0)
            throw ValueError("fit batch must be non-empty");
    }
};

/// Raised when the fit loss stops being finite.
class FitDivergence : public std::runtime_error {
public:
    FitDivergence(std::size_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

struct FitResult {
    ShuParams recovered;
    std::vector<double> loss_curve; ///< entry s is the loss after s updates (steps + 1 entries)
};

inline SpatialTensor random_spatial(CounterRng& rng, std::size_t c, std::size_t h, std::size_t w,
                                    double lo = -1.0, double hi = 1.0) {
    SpatialTensor t(c, h, w);
    for (auto& v : t.data())
        v = rng.uniform(lo, hi);
    return t;
}

inline SpectralTensor random_spectral(CounterRng& rng, std::size_t c, std::size_t h, std::size_t w,
                                      double lo = -1.0, double hi = 1.0) {
    SpectralTensor t(c, h, w);
    for (auto& v : t.data()) {
        const double re = rng.uniform(lo, hi);
        v = {re, rng.uniform(lo, hi)};
    }
    return t;
}

namespace detail {

/// Loss over the batch and the upstream gradient it hands to the unit, per sample.
/// l2_spatial:  1/(2B) sum_b ||f_b - f*_b||^2 over hint-channel pixels.
/// l2_spectrum: 1/(2B H W) sum_b ||g_b - g*_b||^2 over stored bins.
struct FitObjective {
    std::vector<SpatialTensor> inputs;     // hint-channel slices
    std::vector<SpectralTensor> spectra;   // forward_rfft2(inputs)
    std::vector<SpatialTensor> target_f;   // target branch outputs
    std::vector<SpectralTensor> target_g;  // target transform outputs
    FitLoss loss;

    double evaluate(const ShuParams& p, ParamVector* grad) const {
        const double B = static_cast<double>(inputs.size());
        double total = 0.0;
        if (grad)
            grad->values.assign(param_count(p), 0.0);
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            const auto trace = trace_transform(spectra[b], p);
            const auto g = hefilter_apply(trace.rectified, p.hef);
            SpectralTensor upstream(g.channels(), g.height(), g.width());
            if (loss == FitLoss::l2_spatial) {
                const auto f = inverse_rfft2(g, inputs[b].width());
                SpatialTensor diff = spatial_axpy(1.0, f, -1.0, target_f[b]);
                total += 0.5 * real_dot(diff, diff) / B;
                if (grad) {
                    for (auto& v : diff.data())
                        v /= B;
                    upstream = irfft2_adjoint(diff);
                }
            } else {
                const double hw = static_cast<double>(inputs[b].height() * inputs[b].width());
                SpectralTensor diff = spectral_axpy(1.0, g, -1.0, target_g[b]);
                total += 0.5 * real_dot(diff, diff) / (B * hw);
                if (grad) {
                    for (auto& v : diff.data())
                        v /= B * hw;
                    upstream = diff;
                }
            }
            if (grad) {
                const auto tg = transform_backward(trace, p, upstream);
                const auto flat = flatten_params(tg.mix, tg.hef);
                for (std::size_t i = 0; i < flat.size(); ++i)
                    (*grad)[i] += flat[i];
            }
        }
        return total;
    }
};

} // namespace detail

/// Fits a trainee to outputs of `target` on a seeded random batch by plain gradient descent.
/// The trainee starts from identity filter anchors; its mix is the target's (frozen) unless
/// config.train_mix, in which case it starts from the identity mix.
inline FitResult fit_planted(const ShuParams& target, const FitConfig& config) {
    config.validate();
    target.validate();
    CounterRng rng(config.seed);
    detail::FitObjective obj;
    obj.loss = config.loss;
    for (std::size_t b = 0; b < config.batch; ++b) {
        auto x = random_spatial(rng, target.hint_channels, config.height, config.width);
        auto s = forward_rfft2(x);
        auto g = spectral_transform(s, target);
        obj.target_f.push_back(inverse_rfft2(g, config.width));
        obj.target_g.push_back(std::move(g));
        obj.spectra.push_back(std::move(s));
        obj.inputs.push_back(std::move(x));
    }

    ShuParams trainee = target;
    trainee.hef = HeFilterParams::identity(target.hint_channels, target.hef.mode(), target.hef.grid_rows(),
                                           target.hef.grid_cols());
    if (config.train_mix)
        trainee.mix = ChannelMix::identity(target.hint_channels, target.mix.mode());
    const std::size_t mix_params = param_count(trainee) - 2 * trainee.hef.anchor_count() * trainee.hef.anchor_size();

    FitResult result{trainee, {}};
    ParamVector theta = flatten_params(trainee);
    ParamVector grad;
    for (std::size_t step = 0;; ++step) {
        const double loss = obj.evaluate(result.recovered, &grad);
        if (!std::isfinite(loss))
            throw FitDivergence(step, "fit diverged at step " + std::to_string(step) + " (loss is not finite)");
        result.loss_curve.push_back(loss);
        if (step == config.steps)
            break;
        for (std::size_t i = config.train_mix ? 0 : mix_params; i < theta.size(); ++i)
            theta[i] -= config.step_size * grad[i];
        result.recovered = unflatten_params(theta, trainee);
    }
    return result;
}

} // namespace shint
