// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "oracles.hpp"
#include "shint/shint.hpp"
#include "support.hpp"

using namespace shint;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

// -----------------------------------------------------------------------------------------------

Outcome fft_round_trip_and_linearity() {
    constexpr double tol = 1e-12;
    std::mt19937_64 gen(1001);
    std::uniform_int_distribution<int> pick_c(1, 4), pick_log(1, 6);
    double rt = 0.0, lin = 0.0, dft = 0.0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t c = static_cast<std::size_t>(pick_c(gen));
        const std::size_t h = std::size_t{1} << pick_log(gen), w = std::size_t{1} << pick_log(gen);
        const auto x1 = support::random_spatial(gen, c, h, w);
        const auto x2 = support::random_spatial(gen, c, h, w);
        const auto s1 = forward_rfft2(x1), s2 = forward_rfft2(x2);
        rt = std::max(rt, max_abs_diff(inverse_rfft2(s1, w), x1));
        lin = std::max(lin, max_abs_diff(forward_rfft2(spatial_axpy(2.0, x1, -3.0, x2)),
                                         spectral_axpy(2.0, s1, -3.0, s2)));
        if (h <= 16 && w <= 16)
            dft = std::max(dft, max_abs_diff(s1, oracle::naive_rfft2(x1)));
    }
    for (std::size_t h : {2u, 4u, 8u, 16u})
        for (std::size_t w : {2u, 4u, 8u, 16u}) {
            const auto x = support::random_spatial(gen, 2, h, w);
            dft = std::max(dft, max_abs_diff(forward_rfft2(x), oracle::naive_rfft2(x)));
        }
    char buf[160];
    std::snprintf(buf, sizeof buf, "round_trip=%.2e linearity=%.2e naive_dft=%.2e tol=%.0e", rt, lin, dft, tol);
    return {rt <= tol && lin <= tol && dft <= tol, buf};
}

Outcome lossless_split() {
    constexpr double tol = 1e-12;
    std::mt19937_64 gen(1002);
    double worst = 0.0;
    for (std::size_t res : {8u, 16u, 32u, 64u})
        for (std::size_t c = 1; c <= 4; ++c) {
            const auto s = support::random_spectral(gen, c, res, res / 2 + 1);
            const auto v = vanilla_split(s);
            worst = std::max(worst, max_abs_diff(vanilla_merge(v.hi, v.lo), s));
            for (double f : {0.5, 2.0, 8.0, 1e9}) {
                const auto g = gaussian_split(s, f * static_cast<double>(res) / 4.0);
                worst = std::max(worst, max_abs_diff(gaussian_merge(g.hi, g.lo), s));
            }
        }
    return {worst <= tol, fmt("max_abs=%.2e tol=%.0e", worst, tol)};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SHINT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome pyramid_file_round_trip() {
    constexpr double tol = 1e-10;
    const auto dir = fs::temp_directory_path() / "shint_acceptance_pyramid";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 gen(1003);
    const auto x = support::random_spatial(gen, 1, 64, 64);
    write_sht(dir / "source.sht", x);
    const std::string d = "'" + dir.string() + "'";
    if (run_cli("decompose " + d + "/source.sht " + d + "/pyr --levels 5") != 0)
        return {false, "decompose failed"};
    std::size_t files = 0;
    for (std::size_t res = 64; res >= 4; res /= 2)
        files += fs::exists(dir / "pyr" / ("level_" + std::to_string(res) + ".sht"));
    if (run_cli("recompose " + d + "/pyr " + d + "/back.sht") != 0)
        return {false, "recompose failed"};
    const double err = max_abs_diff(spatial_from_record(read_sht(dir / "back.sht")), x);
    fs::remove_all(dir);
    return {files == 5 && err <= tol, fmt("levels=%.0f max_abs=%.2e", static_cast<double>(files), err) + " tol=1e-10"};
}

double energy(const SpectralTensor& s) {
    double e = 0.0;
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < s.height(); ++i)
            for (std::size_t j = 0; j < s.width(); ++j)
                e += column_multiplicity(j, s.width()) * std::norm(s(c, i, j));
    return e;
}

Outcome frequency_segregation() {
    const std::size_t H = 64, W = 64;
    auto cosine = [&](std::size_t fr, std::size_t fc) {
        SpatialTensor x(1, H, W);
        for (std::size_t m = 0; m < H; ++m)
            for (std::size_t n = 0; n < W; ++n)
                x(0, m, n) = std::cos(2.0 * std::numbers::pi *
                                      (static_cast<double>(fr * m) / H + static_cast<double>(fc * n) / W));
        return x;
    };
    double worst_low = 1.0, worst_high = 1.0;
    for (std::size_t fr = 0; fr <= H / 2; ++fr)
        for (std::size_t fc = 0; fc <= W / 2; ++fc) {
            const bool low = fr < H / 8 && fc < W / 8, high = fr > H / 4 || fc > W / 4;
            if (!low && !high)
                continue;
            const auto parts = vanilla_split(forward_rfft2(cosine(fr, fc)));
            const double lo = energy(embed_low_block(parts.lo, H, W / 2 + 1)), hi = energy(parts.hi);
            if (low)
                worst_low = std::min(worst_low, lo / (lo + hi));
            else
                worst_high = std::min(worst_high, hi / (lo + hi));
        }
    // high band: 100% up to FFT round-off
    const bool pass = worst_low >= 0.99 && worst_high >= 1.0 - 1e-15;
    return {pass, fmt("min_low_fraction=%.15f min_high_fraction=%.15f", worst_low, worst_high)};
}

Outcome hefilter_semantics() {
    std::mt19937_64 gen(1005);
    bool exact_anchor = true;
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        HeFilterParams p(2, FilterMode::full_matrix, 8, 3);
        for (auto& w : p.weights())
            w = {u(gen), u(gen)};
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 3; ++c) {
                const auto w = hefilter_weight_at(p, r, 8, 4 * c, 9);
                for (std::size_t n = 0; n < w.size(); ++n)
                    exact_anchor = exact_anchor && w[n] == p.anchor(r, c)[n];
            }
        HeFilterParams d(3);
        for (auto& w : d.weights())
            w = {u(gen), u(gen)};
        for (std::size_t r : {0u, 2u})
            for (std::size_t c : {0u, 1u}) {
                const auto w = hefilter_weight_at(d, r == 0 ? 0 : 15, 16, c == 0 ? 0 : 8, 9);
                for (std::size_t n = 0; n < 3; ++n)
                    exact_anchor = exact_anchor && w[n] == d.anchor(r, c)[n];
            }
    }
    bool exact_uniform = true;
    {
        const auto s = support::random_spectral(gen, 2, 16, 9);
        for (auto mode : {FilterMode::diagonal, FilterMode::full_matrix}) {
            const auto out = hefilter_apply(s, HeFilterParams::uniform(2, 2.0, mode));
            for (std::size_t n = 0; n < s.size(); ++n)
                exact_uniform = exact_uniform && out.data()[n] == 2.0 * s.data()[n];
        }
    }
    double ramp = 0.0;
    {
        const cdouble a{0.3, 0.1}, b{1.7, -0.5};
        HeFilterParams p(1);
        for (std::size_t r = 0; r < 3; ++r) {
            p.anchor(r, 0)[0] = a;
            p.anchor(r, 1)[0] = b;
        }
        const std::size_t H = 16, W = 32, Ws = W / 2 + 1;
        const auto out = hefilter_apply(SpectralTensor(1, H, Ws, std::vector<cdouble>(H * Ws, 1.0)), p);
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < Ws; ++j)
                ramp = std::max(ramp, std::abs(out(0, i, j) - (a + (b - a) * (static_cast<double>(j) / (W / 2.0)))));
        ramp = std::max(ramp, std::abs(out(0, 5, W / 4) - (a + b) / 2.0));
    }
    const bool pass = exact_anchor && exact_uniform && ramp <= 1e-14;
    return {pass, std::string("anchor_exact=") + (exact_anchor ? "yes" : "no") +
                      " uniform_exact=" + (exact_uniform ? "yes" : "no") + fmt(" ramp_err=%.2e tol=%.0e", ramp, 1e-14)};
}

Outcome gradient_correctness() {
    double grad_worst = 0.0, adj_worst = 0.0;
    bool pass = true;
    std::size_t stages = 0;
    for (std::size_t size : {8u, 16u})
        for (std::uint64_t seed : {7u, 8u}) {
            GradcheckOptions opt;
            opt.seed = seed;
            opt.size = size;
            opt.total_channels = 4;
            opt.hint_channels = 2;
            for (const auto& r : GradcheckSuite(opt).run()) {
                ++stages;
                pass = pass && r.passed();
                if (r.name.starts_with("adjoint:"))
                    adj_worst = std::max(adj_worst, r.max_error);
                else
                    grad_worst = std::max(grad_worst, r.max_error);
            }
        }
    pass = pass && grad_worst <= 1e-6 && adj_worst <= 1e-10;
    return {pass, fmt("max_grad_rel_err=%.2e (tol 1e-6) max_adjoint_err=%.2e (tol 1e-10)", grad_worst, adj_worst) +
                      " stages=" + std::to_string(stages)};
}

Outcome shu_residual_identity() {
    std::mt19937_64 gen(1007);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    bool zero_identity = true, pass_through = true;
    for (std::size_t K : {1u, 2u, 4u})
        for (auto mm : {MixMode::complex_matrix, MixMode::stacked_real})
            for (auto fm : {FilterMode::diagonal, FilterMode::full_matrix}) {
                const auto x = support::random_spatial(gen, 4, 16, 16);
                auto p = ShuParams::zero_init(4, K, mm, fm);
                for (auto& w : p.hef.weights())
                    w = {u(gen), u(gen)};
                zero_identity = zero_identity && shu_forward(x, p) == x;
                for (auto& w : p.mix.complex_weights())
                    w = {u(gen), u(gen)};
                for (auto& w : p.mix.real_weights())
                    w = u(gen);
                const auto y = shu_forward(x, p);
                for (std::size_t c = 0; c < 4 - K; ++c)
                    for (std::size_t n = 0; n < x.plane_size(); ++n)
                        pass_through = pass_through && y.plane(c)[n] == x.plane(c)[n];
            }
    return {zero_identity && pass_through, std::string("zero_mix_bitwise=") + (zero_identity ? "yes" : "no") +
                                               " pass_through_bitwise=" + (pass_through ? "yes" : "no")};
}

Outcome planted_recovery() {
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CounterRng rng(seed ^ 0x5A5A5A5A5A5A5A5AULL);
        ShuParams target{1, 1, ChannelMix::identity(1), HeFilterParams(1), std::nullopt};
        for (auto& w : target.hef.weights())
            w = rng.uniform(0.5, 1.5);
        FitConfig cfg;
        cfg.seed = seed;
        cfg.steps = 256;
        cfg.height = cfg.width = 16;
        const auto r = fit_planted(target, cfg);
        worst_ratio = std::max(worst_ratio, r.loss_curve.back() / r.loss_curve.front());
    }
    return {worst_ratio <= 1e-4, fmt("worst_final_over_initial=%.2e tol=%.0e (5 seeds)", worst_ratio, 1e-4)};
}

Outcome mask_compliance() {
    MaskSpec spec;
    spec.height = spec.width = 256;
    bool in_support = true, binary = true, deterministic = true;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        spec.seed = seed;
        const auto m = generate_mask(spec);
        const auto& p = m.provenance;
        in_support = in_support && p.stroke_count <= 20 && p.full_rect_count <= 5 && p.half_rect_count <= 10 &&
                     p.stroke_widths.size() == p.stroke_count;
        for (auto w : p.stroke_widths)
            in_support = in_support && w >= 12 && w <= 48;
        for (auto v : m.values)
            binary = binary && (v == 0 || v == 1);
        if (seed % 100 == 0)
            deterministic = deterministic && generate_mask(spec).values == m.values;
    }
    return {in_support && binary && deterministic, std::string("masks=10000 supports=") + (in_support ? "ok" : "violated") +
                                                       " binary=" + (binary ? "yes" : "no") +
                                                       " deterministic=" + (deterministic ? "yes" : "no")};
}

Outcome convolution_theorem() {
    constexpr double tol = 1e-10;
    std::mt19937_64 gen(1010);
    double worst = 0.0;
    for (std::size_t n : {4u, 8u, 16u, 32u})
        for (double sigma : {0.5, 2.0, static_cast<double>(n) / 4.0, 1e9}) {
            const auto x = support::random_spatial(gen, 1, n, n);
            const auto map = build_gaussian_map(n, n / 2 + 1, false, sigma);
            SpectralTensor ns(1, n, n / 2 + 1);
            for (std::size_t k = 0; k < ns.size(); ++k)
                ns.data()[k] = map.values()[k];
            auto s = forward_rfft2(x);
            for (std::size_t k = 0; k < s.size(); ++k)
                s.data()[k] *= ns.data()[k];
            worst = std::max(worst, max_abs_diff(inverse_rfft2(s, n),
                                                 oracle::circular_convolve(x, inverse_rfft2(ns, n))));
        }
    return {worst <= tol, fmt("max_abs=%.2e tol=%.0e", worst, tol)};
}

} // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"fft round trip, linearity and naive DFT agreement", fft_round_trip_and_linearity},
        {"lossless vanilla and gaussian split", lossless_split},
        {"5-level pyramid file round trip", pyramid_file_round_trip},
        {"frequency segregation", frequency_segregation},
        {"hefilter anchor, uniform and ramp semantics", hefilter_semantics},
        {"gradient and adjoint correctness", gradient_correctness},
        {"shu residual identity and pass-through", shu_residual_identity},
        {"planted-weight recovery", planted_recovery},
        {"mask generator compliance", mask_compliance},
        {"convolution theorem", convolution_theorem},
    };
    int failed = 0, index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d: %-52s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
