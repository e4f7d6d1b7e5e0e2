// shint: command-line front end for the spectral hint library.
//
// Exit codes: 0 success, 1 usage / invalid argument, 2 I/O or format error, 3 shape error,
// 4 gradient check failure, 5 fit divergence.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <unistd.h>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "shint/shint.hpp"

namespace fs = std::filesystem;
using namespace shint;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_io = 2,
    exit_shape = 3,
    exit_gradcheck = 4,
    exit_divergence = 5,
};

bool is_image_path(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".pgm" || ext == ".ppm";
}

using AnyTensor = std::variant<SpatialTensor, SpectralTensor>;

/// .sht (real or complex) or PGM/PPM, sniffed from the leading bytes.
AnyTensor load_tensor(const fs::path& path) {
    const auto bytes = io::read_file(path);
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "SHT1")) {
        const auto rec = decode_sht(bytes);
        if (rec.kind == ShtKind::real)
            return spatial_from_record(rec);
        return spectral_from_record(rec);
    }
    return to_tensor(decode_image(bytes));
}

SpatialTensor load_spatial(const fs::path& path) {
    auto t = load_tensor(path);
    if (auto* s = std::get_if<SpatialTensor>(&t))
        return std::move(*s);
    throw FormatError(path.string() + " holds a complex tensor, expected a real one or an image");
}

SpectralTensor load_spectral(const fs::path& path) {
    auto t = load_tensor(path);
    if (auto* s = std::get_if<SpectralTensor>(&t))
        return std::move(*s);
    throw FormatError(path.string() + " holds a real tensor, expected a complex spectrum");
}

void save_spatial(const fs::path& path, const SpatialTensor& t) {
    if (is_image_path(path))
        write_image(path, from_tensor(t));
    else
        write_sht(path, t);
}

/// Directory output assembled in a sibling staging directory, moved into place on commit().
class StagedDir {
public:
    explicit StagedDir(fs::path target) : target_(std::move(target)) {
        staging_ = target_;
        staging_ += ".partial-" + std::to_string(::getpid());
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;
    ~StagedDir() {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }

    const fs::path& path() const { return staging_; }

    void commit() {
        if (!fs::exists(target_)) {
            fs::rename(staging_, target_);
            return;
        }
        for (const auto& entry : fs::directory_iterator(staging_)) {
            const auto dst = target_ / entry.path().filename();
            if (entry.is_directory())
                fs::remove_all(dst);
            fs::rename(entry.path(), dst);
        }
    }

private:
    fs::path target_, staging_;
};

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
    static const std::regex re(R"((\d+)(?:x(\d+))?)");
    std::smatch m;
    if (!std::regex_match(s, m, re))
        throw ValueError("size must look like 256 or 256x256, got '" + s + "'");
    const std::size_t h = std::stoul(m[1].str());
    const std::size_t w = m[2].matched ? std::stoul(m[2].str()) : h;
    return {h, w};
}

FilterMode parse_filter_mode(const std::string& s) {
    if (s == "diagonal")
        return FilterMode::diagonal;
    if (s == "full" || s == "full_matrix")
        return FilterMode::full_matrix;
    throw ValueError("unknown filter mode '" + s + "'");
}

// -------------------------------------------------------------------------------------------

int cmd_fft(const fs::path& in, const fs::path& out) {
    write_sht(out, forward_rfft2(load_spatial(in)));
    return exit_ok;
}

int cmd_ifft(const fs::path& in, const fs::path& out) {
    save_spatial(out, inverse_rfft2(load_spectral(in)));
    return exit_ok;
}

int cmd_decompose(const fs::path& in, const fs::path& out_dir, std::size_t levels, const std::string& kind,
                  double sigma_ratio) {
    auto t = load_tensor(in);
    MetaMap extra;
    SpectralTensor s = std::visit(
        [&](auto& v) -> SpectralTensor {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, SpatialTensor>) {
                extra["source_kind"] = "real";
                return forward_rfft2(v);
            } else {
                extra["source_kind"] = "complex";
                return v;
            }
        },
        t);
    const auto pyramid = pyramid_split(s, levels, parse_split_kind(kind), sigma_ratio);
    StagedDir staged(out_dir);
    write_pyramid(staged.path(), pyramid, extra);
    staged.commit();
    for (const auto& l : pyramid.levels)
        std::cout << level_stem(l.resolution()) << " " << l.hint.shape_str() << "\n";
    return exit_ok;
}

int cmd_recompose(const fs::path& in_dir, const fs::path& out) {
    MetaMap meta;
    const auto pyramid = read_pyramid(in_dir, &meta);
    const auto s = pyramid_merge(pyramid);
    const auto it = meta.find("source_kind");
    if (it != meta.end() && it->second == "complex")
        write_sht(out, s);
    else
        save_spatial(out, inverse_rfft2(s));
    return exit_ok;
}

int cmd_filter(const fs::path& in, const fs::path& out, const std::optional<fs::path>& params_path,
               const std::string& mode, const std::string& grid) {
    auto t = load_tensor(in);
    const bool spatial = std::holds_alternative<SpatialTensor>(t);
    const SpectralTensor s = spatial ? forward_rfft2(std::get<SpatialTensor>(t)) : std::get<SpectralTensor>(t);
    HeFilterParams p = [&] {
        if (params_path) {
            auto loaded = read_hefilter(*params_path);
            if (!mode.empty() && loaded.mode() != parse_filter_mode(mode))
                throw ValueError("--mode does not match the mode stored in " + params_path->string());
            return loaded;
        }
        const auto [rows, cols] = parse_size(grid);
        return HeFilterParams::identity(s.channels(), mode.empty() ? FilterMode::diagonal : parse_filter_mode(mode),
                                        rows, cols);
    }();
    const auto filtered = hefilter_apply(s, p);
    if (spatial)
        save_spatial(out, inverse_rfft2(filtered));
    else
        write_sht(out, filtered);
    return exit_ok;
}

int cmd_maskgen(const fs::path& out, const std::string& size, std::uint64_t seed) {
    MaskSpec spec;
    std::tie(spec.height, spec.width) = parse_size(size);
    spec.seed = seed;
    const auto m = generate_mask(spec);
    write_image(out, mask_to_image(m));
    std::cout << "strokes=" << m.provenance.stroke_count << " full_rects=" << m.provenance.full_rect_count
              << " half_rects=" << m.provenance.half_rect_count << " unknown_fraction=" << m.unknown_fraction()
              << "\n";
    return exit_ok;
}

int cmd_apply_mask(const fs::path& in, const fs::path& mask_path, const fs::path& out) {
    save_spatial(out, apply_mask(load_spatial(in), mask_from_image(read_image(mask_path))));
    return exit_ok;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t size) {
    GradcheckOptions opt;
    opt.seed = seed;
    opt.size = size;
    SpatialTensor(1, size, size); // validates the size before any work
    bool ok = true;
    for (const auto& r : GradcheckSuite(opt).run()) {
        std::printf("%-36s max_rel_err=%.3e tol=%.0e %s\n", r.name.c_str(), r.max_error, r.tolerance,
                    r.passed() ? "PASS" : "FAIL");
        ok = ok && r.passed();
    }
    return ok ? exit_ok : exit_gradcheck;
}

int cmd_fit(const fs::path& out_dir, std::uint64_t seed, std::size_t steps, double step_size, const std::string& loss,
            const std::string& size, std::size_t batch) {
    FitConfig cfg;
    cfg.seed = seed;
    cfg.steps = steps;
    cfg.step_size = step_size;
    cfg.loss = parse_fit_loss(loss);
    std::tie(cfg.height, cfg.width) = parse_size(size);
    cfg.batch = batch;

    // planted target: identity mix, diagonal anchors drawn from U[0.5, 1.5]
    CounterRng rng(seed ^ 0x5A5A5A5A5A5A5A5AULL);
    ShuParams target{1, 1, ChannelMix::identity(1), HeFilterParams(1), std::nullopt};
    for (auto& w : target.hef.weights())
        w = rng.uniform(0.5, 1.5);

    const auto result = fit_planted(target, cfg);
    StagedDir staged(out_dir);
    std::string csv = "step,loss\n";
    for (std::size_t s = 0; s < result.loss_curve.size(); ++s)
        csv += std::to_string(s) + "," + format_double(result.loss_curve[s]) + "\n";
    io::write_file_atomic(staged.path() / "loss_curve.csv",
                          std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    write_shu_params(staged.path() / "recovered", result.recovered);
    write_shu_params(staged.path() / "target", target);
    staged.commit();
    std::printf("initial_loss=%.6e final_loss=%.6e ratio=%.3e\n", result.loss_curve.front(), result.loss_curve.back(),
                result.loss_curve.back() / result.loss_curve.front());
    return exit_ok;
}

/// log(1 + |X|) of every stored bin, linearly mapped so the largest value becomes 255; channels stacked vertically.
int cmd_spectrum(const fs::path& in, const fs::path& out) {
    auto t = load_tensor(in);
    const SpectralTensor s =
        std::holds_alternative<SpatialTensor>(t) ? forward_rfft2(std::get<SpatialTensor>(t)) : std::get<SpectralTensor>(t);
    std::vector<double> mag(s.size());
    double peak = 0.0;
    for (std::size_t n = 0; n < mag.size(); ++n) {
        mag[n] = std::log1p(std::abs(s.data()[n]));
        peak = std::max(peak, mag[n]);
    }
    ImageBuffer img{1, s.channels() * s.height(), s.width(), std::vector<std::uint8_t>(s.size())};
    for (std::size_t n = 0; n < mag.size(); ++n)
        img.samples[n] = peak > 0.0 ? static_cast<std::uint8_t>(std::lround(255.0 * mag[n] / peak)) : 0;
    write_image(out, img);
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral hint toolkit: real 2D FFTs, heterogeneous filtering, spectral pyramids, masks"};
    app.require_subcommand(1);
    app.allow_extras(false);

    std::string in, out, mask, params_path, kind = "gaussian", mode, grid = "3x2", size_str, loss = "l2_spatial";
    std::size_t levels = 5, size = 8, steps = 256, batch = 4;
    double sigma_ratio = default_sigma_ratio, step_size = 0.1;
    std::uint64_t seed = 0;
    int rc = exit_ok;

    auto* fft = app.add_subcommand("fft", "forward real FFT of a real .sht or PGM/PPM into a complex .sht");
    fft->add_option("input", in)->required();
    fft->add_option("output", out)->required();
    fft->callback([&] { rc = cmd_fft(in, out); });

    auto* ifft = app.add_subcommand("ifft", "inverse real FFT of a complex .sht (output .sht, or .pgm/.ppm)");
    ifft->add_option("input", in)->required();
    ifft->add_option("output", out)->required();
    ifft->callback([&] { rc = cmd_ifft(in, out); });

    auto* dec = app.add_subcommand("decompose", "split into a multi-resolution pyramid directory");
    dec->add_option("input", in)->required();
    dec->add_option("output_dir", out)->required();
    dec->add_option("--levels", levels, "number of pyramid levels")->capture_default_str();
    dec->add_option("--kind", kind, "vanilla or gaussian")->capture_default_str();
    dec->add_option("--sigma-ratio", sigma_ratio, "gaussian sigma as a fraction of the block height")
        ->capture_default_str();
    dec->callback([&] { rc = cmd_decompose(in, out, levels, kind, sigma_ratio); });

    auto* rec = app.add_subcommand("recompose", "reassemble a pyramid directory");
    rec->add_option("input_dir", in)->required();
    rec->add_option("output", out)->required();
    rec->callback([&] { rc = cmd_recompose(in, out); });

    auto* filt = app.add_subcommand("filter", "apply a heterogeneous filter (identity anchors without --params)");
    filt->add_option("input", in)->required();
    filt->add_option("output", out)->required();
    filt->add_option("--params", params_path, "HEF1 parameter file");
    filt->add_option("--mode", mode, "diagonal or full (default diagonal)");
    filt->add_option("--grid", grid, "anchor grid rows x cols")->capture_default_str();
    filt->callback([&] {
        rc = cmd_filter(in, out, params_path.empty() ? std::nullopt : std::optional<fs::path>(params_path), mode, grid);
    });

    auto* mg = app.add_subcommand("maskgen", "generate a free-form mask as PGM (known = 255)");
    mg->add_option("output", out)->required();
    size_str = "256x256";
    mg->add_option("--size", size_str, "HxW")->capture_default_str();
    mg->add_option("--seed", seed)->capture_default_str();
    mg->callback([&] { rc = cmd_maskgen(out, size_str, seed); });

    auto* am = app.add_subcommand("apply-mask", "multiply an image or real tensor by a PGM mask");
    am->add_option("input", in)->required();
    am->add_option("mask", mask)->required();
    am->add_option("output", out)->required();
    am->callback([&] { rc = cmd_apply_mask(in, mask, out); });

    auto* gc = app.add_subcommand("gradcheck", "compare every backward pass with central differences");
    gc->add_option("--seed", seed)->capture_default_str();
    gc->add_option("--size", size, "spatial side length (even)")->capture_default_str();
    gc->callback([&] { rc = cmd_gradcheck(seed, size); });

    auto* fit = app.add_subcommand("fit", "recover a planted diagonal filter by gradient descent");
    fit->add_option("output_dir", out)->required();
    fit->add_option("--seed", seed)->capture_default_str();
    fit->add_option("--steps", steps)->capture_default_str();
    fit->add_option("--step-size", step_size)->capture_default_str();
    fit->add_option("--loss", loss, "l2_spatial or l2_spectrum")->capture_default_str();
    std::string fit_size = "16x16";
    fit->add_option("--size", fit_size, "HxW")->capture_default_str();
    fit->add_option("--batch", batch)->capture_default_str();
    fit->callback([&] { rc = cmd_fit(out, seed, steps, step_size, loss, fit_size, batch); });

    auto* spec = app.add_subcommand("spectrum", "log-magnitude PGM of the shifted half spectrum");
    spec->add_option("input", in)->required();
    spec->add_option("output", out)->required();
    spec->callback([&] { rc = cmd_spectrum(in, out); });

    app.footer("Defaults: hint channels K=" + std::to_string(default_hint_channels) +
               ", anchor grid 3x2, sigma ratio 0.25, pyramid ladder down to resolution 4.\n"
               "Exit codes: 1 usage, 2 I/O/format, 3 shape, 4 gradcheck failure, 5 fit divergence.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return exit_shape;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const FitDivergence& e) {
        std::cerr << "fit diverged: " << e.what() << "\n";
        return exit_divergence;
    } catch (const ValueError& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return exit_usage;
    }
    return rc;
}
