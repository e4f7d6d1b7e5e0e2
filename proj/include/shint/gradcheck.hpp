#pragma once

// Stage-by-stage comparison of every analytic backward pass against central differences, plus
// dot-product adjoint tests for the linear stages. Each probe uses a random linear functional
// L(y) = <w, y> of the stage output so the exact gradient is the stage transpose applied to w.
// The differences are taken through the extended-precision reference forward passes.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shint/fft.hpp"
#include "shint/grad.hpp"
#include "shint/hefilter.hpp"
#include "shint/random.hpp"
#include "shint/reference.hpp"
#include "shint/shu.hpp"
#include "shint/spectral_split.hpp"
#include "shint/tensor.hpp"

namespace shint {

struct GradcheckOptions {
    std::uint64_t seed = 7;
    std::size_t size = 8; ///< spatial H = W
    std::size_t total_channels = 4;
    std::size_t hint_channels = 2;
    double step = 1e-6;
    double rel_tol = 1e-6;
    double abs_floor = 1e-9;
    double adjoint_tol = 1e-10;
    double kink_margin = 1e-4; ///< relu probes resample until every pre-activation is this far from 0
};

struct StageReport {
    std::string name;
    double max_error; ///< relative gradient error, or relative adjoint residual
    double tolerance;
    bool passed() const { return max_error <= tolerance; }
};

namespace detail {

inline std::vector<double> flat(const SpectralTensor& t) {
    std::vector<double> v;
    v.reserve(2 * t.size());
    for (const auto& z : t.data()) {
        v.push_back(z.real());
        v.push_back(z.imag());
    }
    return v;
}

inline std::vector<double> flat(const SpatialTensor& t) { return {t.data().begin(), t.data().end()}; }

inline SpectralTensor unflat_spectral(std::span<const double> v, const SpectralTensor& shape) {
    SpectralTensor t(shape.channels(), shape.height(), shape.width());
    for (std::size_t n = 0; n < t.size(); ++n)
        t.data()[n] = {v[2 * n], v[2 * n + 1]};
    return t;
}

inline SpatialTensor unflat_spatial(std::span<const double> v, const SpatialTensor& shape) {
    return SpatialTensor(shape.channels(), shape.height(), shape.width(), {v.begin(), v.end()});
}

inline bool clear_of_kinks(const SpectralTensor& pre, double margin) {
    for (const auto& z : pre.data())
        if (std::abs(z.real()) < margin || std::abs(z.imag()) < margin)
            return false;
    return true;
}

inline HeFilterParams random_filter(CounterRng& rng, std::size_t K, FilterMode mode) {
    HeFilterParams p(K, mode);
    for (auto& w : p.weights()) {
        const double re = rng.uniform(-1.0, 1.0);
        w = {re, rng.uniform(-1.0, 1.0)};
    }
    return p;
}

inline ChannelMix random_mix(CounterRng& rng, std::size_t K, MixMode mode) {
    ChannelMix m(K, mode);
    for (auto& w : m.complex_weights()) {
        const double re = rng.uniform(-1.0, 1.0);
        w = {re, rng.uniform(-1.0, 1.0)};
    }
    for (auto& w : m.real_weights())
        w = rng.uniform(-1.0, 1.0);
    return m;
}

} // namespace detail

class GradcheckSuite {
public:
    explicit GradcheckSuite(GradcheckOptions opt = {}) : opt_(opt), rng_(opt.seed) {}

    std::vector<StageReport> run() {
        std::vector<StageReport> out;
        out.push_back(fft_forward());
        out.push_back(fft_inverse());
        out.push_back(mix_stage(MixMode::complex_matrix, "channel_mix[complex]"));
        out.push_back(mix_stage(MixMode::stacked_real, "channel_mix[stacked]"));
        out.push_back(relu_stage());
        out.push_back(hefilter_stage(FilterMode::diagonal, "hefilter[diagonal]"));
        out.push_back(hefilter_stage(FilterMode::full_matrix, "hefilter[full_matrix]"));
        out.push_back(pipeline_stage(MixMode::complex_matrix, FilterMode::diagonal, "shu_pipeline[complex,diagonal]"));
        out.push_back(pipeline_stage(MixMode::stacked_real, FilterMode::full_matrix, "shu_pipeline[stacked,full]"));
        for (auto& r : adjoint_checks())
            out.push_back(std::move(r));
        return out;
    }

    StageReport fft_forward() {
        const std::size_t n = opt_.size;
        const auto x = random_spatial(rng_, 2, n, n);
        const auto w = random_spectral(rng_, 2, n, n / 2 + 1);
        const auto analytic = detail::flat(rfft2_adjoint(w));
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                return reference::dot(reference::rfft2(reference::spatial_from(v, 2, n, n)), w);
            },
            detail::flat(x), opt_.step);
        return grad_report("forward_rfft2", analytic, numeric.values);
    }

    StageReport fft_inverse() {
        const std::size_t n = opt_.size;
        const auto s = random_spectral(rng_, 2, n, n / 2 + 1);
        const auto w = random_spatial(rng_, 2, n, n);
        const auto analytic = detail::flat(irfft2_adjoint(w));
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                return reference::dot(reference::irfft2(reference::spectral_from(v, 2, n, n / 2 + 1)), w);
            },
            detail::flat(s), opt_.step);
        return grad_report("inverse_rfft2", analytic, numeric.values);
    }

    StageReport mix_stage(MixMode mode, const std::string& name) {
        const std::size_t K = opt_.hint_channels, n = opt_.size;
        const auto s = random_spectral(rng_, K, n, n / 2 + 1);
        const auto w = random_spectral(rng_, K, n, n / 2 + 1);
        const auto mix = detail::random_mix(rng_, K, mode);
        const auto g = channel_mix_backward(s, mix, w);
        const HeFilterParams no_filter(K);
        auto analytic = detail::flat(g.input);
        const auto pg = flatten_params(g.mix, no_filter);
        analytic.insert(analytic.end(), pg.values.begin(), pg.values.end());

        const std::size_t ns = 2 * s.size();
        ParamVector theta{detail::flat(s)};
        const auto pm = flatten_params(mix, no_filter);
        theta.values.insert(theta.values.end(), pm.values.begin(), pm.values.end());
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                const auto sv = reference::spectral_from(v.subspan(0, ns), K, n, n / 2 + 1);
                return reference::dot(reference::channel_mix(sv, mode, v.subspan(ns)), w);
            },
            theta.values, opt_.step);
        return grad_report(name, analytic, numeric.values);
    }

    StageReport relu_stage() {
        const std::size_t K = opt_.hint_channels, n = opt_.size;
        auto s = random_spectral(rng_, K, n, n / 2 + 1);
        while (!detail::clear_of_kinks(s, opt_.kink_margin))
            s = random_spectral(rng_, K, n, n / 2 + 1);
        const auto w = random_spectral(rng_, K, n, n / 2 + 1);
        const auto analytic = detail::flat(split_relu_backward(s, w));
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                return reference::dot(reference::split_relu(reference::spectral_from(v, K, n, n / 2 + 1)), w);
            },
            detail::flat(s), opt_.step);
        return grad_report("split_relu", analytic, numeric.values);
    }

    StageReport hefilter_stage(FilterMode mode, const std::string& name) {
        const std::size_t K = opt_.hint_channels, n = opt_.size;
        const auto s = random_spectral(rng_, K, n, n / 2 + 1);
        const auto w = random_spectral(rng_, K, n, n / 2 + 1);
        const auto p = detail::random_filter(rng_, K, mode);
        const auto g = hefilter_backward(s, p, w);
        auto analytic = detail::flat(g.input);
        for (const auto& z : g.params.weights()) {
            analytic.push_back(z.real());
            analytic.push_back(z.imag());
        }
        const std::size_t ns = 2 * s.size();
        ParamVector theta{detail::flat(s)};
        for (const auto& z : p.weights()) {
            theta.values.push_back(z.real());
            theta.values.push_back(z.imag());
        }
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                const auto sv = reference::spectral_from(v.subspan(0, ns), K, n, n / 2 + 1);
                return reference::dot(reference::hefilter(sv, mode, p.grid_rows(), p.grid_cols(), v.subspan(ns)), w);
            },
            theta.values, opt_.step);
        return grad_report(name, analytic, numeric.values);
    }

    StageReport pipeline_stage(MixMode mix_mode, FilterMode filter_mode, const std::string& name) {
        const std::size_t N = opt_.total_channels, K = opt_.hint_channels, n = opt_.size;
        ShuParams p{N, K, detail::random_mix(rng_, K, mix_mode), detail::random_filter(rng_, K, filter_mode),
                    std::nullopt};
        auto x = random_spatial(rng_, N, n, n);
        auto pre = [&] { return channel_mix(forward_rfft2(x.slice_channels(N - K, K)), p.mix); };
        while (!detail::clear_of_kinks(pre(), opt_.kink_margin))
            x = random_spatial(rng_, N, n, n);
        const auto w = random_spatial(rng_, N, n, n);

        const auto g = backward_pipeline(x, p, w);
        auto analytic = detail::flat(g.input);
        analytic.insert(analytic.end(), g.params.values.begin(), g.params.values.end());

        const std::size_t nx = x.size();
        ParamVector theta{detail::flat(x)};
        const auto pv = flatten_params(p);
        theta.values.insert(theta.values.end(), pv.values.begin(), pv.values.end());
        const auto numeric = reference::central_differences(
            [&](std::span<const reference::real> v) {
                const auto xv = reference::spatial_from(v.subspan(0, nx), N, n, n);
                return reference::dot(reference::shu_forward(xv, p, v.subspan(nx)), w);
            },
            theta.values, opt_.step);
        return grad_report(name, analytic, numeric.values);
    }

    /// <A u, v> against <u, A^T v> for every linear stage; reports |lhs - rhs| / max(|lhs|, |rhs|, 1).
    std::vector<StageReport> adjoint_checks() {
        const std::size_t K = opt_.hint_channels, n = opt_.size, ws = n / 2 + 1;
        std::vector<StageReport> out;
        auto report = [&](const std::string& name, double lhs, double rhs) {
            out.push_back({"adjoint:" + name, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0}),
                           opt_.adjoint_tol});
        };
        {
            const auto x = random_spatial(rng_, K, n, n);
            const auto y = random_spectral(rng_, K, n, ws);
            report("forward_rfft2", real_dot(forward_rfft2(x), y), real_dot(x, rfft2_adjoint(y)));
        }
        {
            const auto s = random_spectral(rng_, K, n, ws);
            const auto y = random_spatial(rng_, K, n, n);
            report("inverse_rfft2", real_dot(inverse_rfft2(s), y), real_dot(s, irfft2_adjoint(y)));
        }
        for (auto mode : {MixMode::complex_matrix, MixMode::stacked_real}) {
            const auto s = random_spectral(rng_, K, n, ws);
            const auto y = random_spectral(rng_, K, n, ws);
            const auto m = detail::random_mix(rng_, K, mode);
            report(std::string("channel_mix[") + to_string(mode) + "]", real_dot(channel_mix(s, m), y),
                   real_dot(s, channel_mix_backward(s, m, y).input));
        }
        for (auto mode : {FilterMode::diagonal, FilterMode::full_matrix}) {
            const auto s = random_spectral(rng_, K, n, ws);
            const auto y = random_spectral(rng_, K, n, ws);
            const auto p = detail::random_filter(rng_, K, mode);
            report(mode == FilterMode::diagonal ? "hefilter[diagonal]" : "hefilter[full_matrix]",
                   real_dot(hefilter_apply(s, p), y), real_dot(s, hefilter_backward(s, p, y).input));
        }
        if (n % 4 == 0) {
            // split adjoints: the transpose of (hi, lo) = split(s) is hi' + embed(lo') restricted by the masks
            const auto s = random_spectral(rng_, K, n, ws);
            const auto b = low_block(s);
            const auto yh = random_spectral(rng_, K, n, ws);
            const auto yl = random_spectral(rng_, K, b.rows, b.cols);
            const double sigma = 0.25 * static_cast<double>(b.rows);
            for (auto kind : {SplitKind::vanilla, SplitKind::gaussian}) {
                const auto parts = kind == SplitKind::vanilla ? vanilla_split(s) : gaussian_split(s, sigma);
                const double lhs = real_dot(parts.hi, yh) + real_dot(parts.lo, yl);
                // split is a per-bin real scaling, so its transpose applies the same masks
                SpectralTensor t = yh;
                const GaussianMap nmap(n, ws, true, sigma);
                for (std::size_t c = 0; c < K; ++c)
                    for (std::size_t i = 0; i < b.rows; ++i)
                        for (std::size_t j = 0; j < b.cols; ++j) {
                            const double m = kind == SplitKind::vanilla ? 1.0 : nmap(i, j);
                            t(c, b.row0 + i, j) = (1.0 - m) * yh(c, b.row0 + i, j) + m * yl(c, i, j);
                        }
                report(std::string("split[") + to_string(kind) + "]", lhs, real_dot(s, t));
            }
        }
        return out;
    }

private:
    StageReport grad_report(const std::string& name, std::span<const double> analytic, std::span<const double> numeric) const {
        return {name, max_gradient_error(analytic, numeric, opt_.rel_tol, opt_.abs_floor), opt_.rel_tol};
    }

    GradcheckOptions opt_;
    CounterRng rng_;
};

} // namespace shint
