// rangefuse: range-wise ensemble fusion of image restoration outputs.
//
//   rangefuse estimate --gt DIR --pred DIR --pred DIR ... --out lut.json
//   rangefuse fuse     --pred DIR ... --lut lut.json --out DIR
//   rangefuse baseline --method average|zzpm --pred DIR ... --out DIR
//   rangefuse eval     --pred DIR --gt DIR --channel y|rgb [--out report.csv]
//   rangefuse synth    [--spec spec.json] --out DIR
//   rangefuse bench    --pred DIR ... --lut lut.json [--repeat 3]
//
// Exit codes: 0 success, 1 I/O failure, 2 usage or contract violation.

#include "rangefuse/dataset.hpp"
#include "rangefuse/errors.hpp"
#include "rangefuse/fusion.hpp"
#include "rangefuse/image.hpp"
#include "rangefuse/lut.hpp"
#include "rangefuse/metrics.hpp"
#include "rangefuse/parallel.hpp"
#include "rangefuse/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rangefuse;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;

struct Options {
    fs::path gt_dir;
    std::vector<fs::path> pred_dirs;
    fs::path out;
    fs::path lut_path;
    fs::path spec_path;
    std::string method;
    std::string channel = "y";
    std::string init_mode = "sample_variance";
    int bin_width = 32;
    int max_steps = 1000;
    double loglik_tol = 1e-5;
    std::size_t min_pixels = 100;
    int threads = 0;
    int repeat = 3;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> size;
    std::optional<std::size_t> num_ref;
    std::optional<std::size_t> num_test;
};

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<ImageTensor> load_predictions(const AlignedSet& set, std::size_t first_dir, std::size_t k) {
    std::vector<ImageTensor> preds;
    for (std::size_t d = first_dir; d < set.files.size(); ++d) preds.push_back(load_image(set.files[d][k]));
    return preds;
}

int cmd_estimate(const Options& o) {
    EmConfig cfg;
    cfg.max_steps = o.max_steps;
    cfg.loglik_tol = o.loglik_tol;
    cfg.min_pixels = o.min_pixels;
    cfg.init_mode = parse_init_mode(o.init_mode);
    cfg.validate();
    const BinSpace space(o.bin_width);

    std::vector<fs::path> dirs{o.gt_dir};
    dirs.insert(dirs.end(), o.pred_dirs.begin(), o.pred_dirs.end());
    const AlignedSet set = align_directories(dirs);

    ReferenceBatch batch(o.pred_dirs.size());
    for (std::size_t k = 0; k < set.ids.size(); ++k) {
        const ImageTensor gt = load_image(set.files[0][k]);
        const auto preds = load_predictions(set, 1, k);
        batch.append(gt, preds);
    }

    const WeightLut lut = estimate_lut(batch, space, cfg, o.threads);
    serialize_lut(lut, o.out);

    const EntryCounts counts = count_sources(lut);
    std::size_t pixels = 0;
    for (const auto& [key, entry] : lut.entries) pixels += entry.count;
    std::cout << "images: " << set.ids.size() << "  models: " << lut.num_models
              << "  bin_width: " << lut.bin_width << "  pixels: " << pixels << '\n'
              << "entries: " << lut.entries.size() << "  em: " << counts.em
              << "  fallback_small: " << counts.fallback_small
              << "  fallback_undetermined: " << counts.fallback_undetermined << '\n'
              << "wrote " << o.out.string() << '\n';
    return 0;
}

template <class Fuse>
int fuse_directories(const Options& o, Fuse&& fuse) {
    const AlignedSet set = align_directories(o.pred_dirs);
    ensure_directory(o.out);
    parallel_for(set.ids.size(), o.threads, [&](std::size_t k) {
        const auto preds = load_predictions(set, 0, k);
        save_image(fuse(preds), o.out / (set.ids[k] + ".png"));
    });
    std::cout << "fused " << set.ids.size() << " images into " << o.out.string() << '\n';
    return 0;
}

int cmd_fuse(const Options& o) {
    const WeightLut lut = deserialize_lut(o.lut_path);
    if (lut.num_models != o.pred_dirs.size()) {
        throw ContractError("LUT was estimated for " + std::to_string(lut.num_models) + " models, got " +
                            std::to_string(o.pred_dirs.size()) + " prediction directories");
    }
    return fuse_directories(o, [&](const std::vector<ImageTensor>& preds) { return fuse_with_lut(preds, lut); });
}

int cmd_baseline(const Options& o) {
    if (o.method == "average") {
        return fuse_directories(o, [](const std::vector<ImageTensor>& preds) { return fuse_average(preds); });
    }
    if (o.pred_dirs.size() < 2) throw ContractError("zzpm needs at least two prediction directories");
    return fuse_directories(o, [](const std::vector<ImageTensor>& preds) { return fuse_zzpm(preds).image; });
}

int cmd_eval(const Options& o) {
    const MetricReport report =
        evaluate_set(o.pred_dirs.front(), o.gt_dir, parse_channel_mode(o.channel), o.threads);
    if (o.out.empty()) {
        write_report_csv(report, std::cout);
    } else {
        std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + o.out.string());
        write_report_csv(report, out);
        if (!out) throw IoError("failed writing " + o.out.string());
    }
    std::cerr << "images: " << report.per_image.size() << "  channel: " << to_string(report.channel_mode)
              << "  mean_psnr: " << format_metric(report.mean_psnr)
              << "  mean_ssim: " << format_metric(report.mean_ssim) << '\n';
    return 0;
}

int cmd_synth(const Options& o) {
    SynthSpec spec = o.spec_path.empty() ? range_biased_spec() : SynthSpec::load(o.spec_path);
    if (o.seed) spec.seed = *o.seed;
    if (o.size) spec.height = spec.width = *o.size;
    if (o.num_ref) spec.num_ref = *o.num_ref;
    if (o.num_test) spec.num_test = *o.num_test;
    spec.validate();
    ensure_directory(o.out);
    write_synth(spec, gen_set(spec), o.out);
    std::cout << "wrote " << spec.num_ref << " reference and " << spec.num_test << " test images ("
              << spec.num_models << " models) to " << o.out.string() << '\n';
    return 0;
}

int cmd_bench(const Options& o) {
    if (o.repeat < 3) throw ContractError("--repeat must be at least 3");
    const WeightLut lut = deserialize_lut(o.lut_path);
    if (lut.num_models != o.pred_dirs.size()) {
        throw ContractError("LUT model count does not match the prediction directories");
    }
    const AlignedSet set = align_directories(o.pred_dirs);
    std::vector<std::vector<ImageTensor>> inputs;
    for (std::size_t k = 0; k < set.ids.size(); ++k) inputs.push_back(load_predictions(set, 0, k));

    using clock = std::chrono::steady_clock;
    double checksum = 0.0;
    for (const auto& preds : inputs) checksum += fuse_with_lut(preds, lut).data.front();  // warm-up
    const auto start = clock::now();
    for (int r = 0; r < o.repeat; ++r) {
        for (const auto& preds : inputs) checksum += fuse_with_lut(preds, lut).data.front();
    }
    const std::chrono::duration<double> elapsed = clock::now() - start;
    const double mean = elapsed.count() / static_cast<double>(o.repeat * inputs.size());
    std::cout << "images: " << inputs.size() << "  repeats: " << o.repeat << "  bin_width: " << lut.bin_width
              << "  (checksum " << checksum << ")\n"
              << "mean_seconds_per_image " << format_metric(mean) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Range-wise ensemble fusion of image restoration predictions"};
    app.require_subcommand(1);
    Options o;

    auto add_preds = [&](CLI::App* cmd) {
        cmd->add_option("--pred", o.pred_dirs, "Prediction directory, one per model (repeatable)")
            ->required()
            ->check(CLI::ExistingDirectory);
    };
    auto add_threads = [&](CLI::App* cmd) {
        cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    };

    auto* estimate = app.add_subcommand("estimate", "Estimate a range-wise weight LUT on a reference set");
    estimate->add_option("--gt", o.gt_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    add_preds(estimate);
    estimate->add_option("--out", o.out, "Output LUT JSON")->required();
    estimate->add_option("--bin-width", o.bin_width, "Bin width b")->check(CLI::Range(1, 256));
    estimate->add_option("--max-steps", o.max_steps, "EM step limit")->check(CLI::PositiveNumber);
    estimate->add_option("--tol", o.loglik_tol, "Log-likelihood change tolerance")->check(CLI::PositiveNumber);
    estimate->add_option("--min-pixels", o.min_pixels, "Smallest bin group solved by EM");
    estimate->add_option("--init-mode", o.init_mode, "Variance initializer")
        ->check(CLI::IsMember({"sample_variance", "scaled_norm"}));
    add_threads(estimate);

    auto* fuse = app.add_subcommand("fuse", "Fuse test predictions with a LUT");
    add_preds(fuse);
    fuse->add_option("--lut", o.lut_path, "LUT JSON")->required()->check(CLI::ExistingFile);
    fuse->add_option("--out", o.out, "Output directory")->required();
    add_threads(fuse);

    auto* baseline = app.add_subcommand("baseline", "Fuse with a global-weight baseline");
    baseline->add_option("--method", o.method, "average or zzpm")
        ->required()
        ->check(CLI::IsMember({"average", "zzpm"}));
    add_preds(baseline);
    baseline->add_option("--out", o.out, "Output directory")->required();
    add_threads(baseline);

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM of a prediction directory against ground truth");
    eval->add_option("--pred", o.pred_dirs, "Prediction directory")->required()->expected(1)->check(CLI::ExistingDirectory);
    eval->add_option("--gt", o.gt_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--channel", o.channel, "y or rgb")->check(CLI::IsMember({"y", "rgb"}));
    eval->add_option("--out", o.out, "CSV report (stdout if omitted)");
    add_threads(eval);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic reference/test set");
    synth->add_option("--spec", o.spec_path, "Synthetic spec JSON (built-in range-biased spec if omitted)")
        ->check(CLI::ExistingFile);
    synth->add_option("--out", o.out, "Output root directory")->required();
    synth->add_option("--seed", o.seed, "Override the spec seed");
    synth->add_option("--size", o.size, "Override image height and width")->check(CLI::PositiveNumber);
    synth->add_option("--num-ref", o.num_ref, "Override the reference image count");
    synth->add_option("--num-test", o.num_test, "Override the test image count");

    auto* bench = app.add_subcommand("bench", "Mean LUT fusion time per image");
    add_preds(bench);
    bench->add_option("--lut", o.lut_path, "LUT JSON")->required()->check(CLI::ExistingFile);
    bench->add_option("--repeat", o.repeat, "Timed repetitions (>= 3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*estimate) return cmd_estimate(o);
        if (*fuse) return cmd_fuse(o);
        if (*baseline) return cmd_baseline(o);
        if (*eval) return cmd_eval(o);
        if (*synth) return cmd_synth(o);
        if (*bench) return cmd_bench(o);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}
