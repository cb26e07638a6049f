// Command line front end: data generation, the two-stage pipeline and the
// comparison studies. Every study writes results.csv-style output.

#include "m2dl/error.hpp"
#include "m2dl/log.hpp"
#include "m2dl/lrr.hpp"
#include "m2dl/pipeline.hpp"
#include "m2dl/synth.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace m2dl;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> repeats, epochs, image_size, samples, views;
    std::optional<double> eta, noise;
    std::optional<std::string> variant, activation, penalty, train_csv, test_csv, image_dir;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON config (keys as in PipelineConfig)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--repeats", o.repeats, "number of repeats");
    cmd->add_option("--variant", o.variant, "M2DL, SMDL, MDL or TDL");
    cmd->add_option("--activation", o.activation, "ReLU, Sigmoid or Tanh");
    cmd->add_option("--penalty", o.penalty, "LeastTrace, LeastL21, LeastLasso or LeastSparseTrace");
    cmd->add_option("--epochs", o.epochs, "CNN training epochs");
    cmd->add_option("--eta", o.eta, "CNN learning rate");
    cmd->add_option("--image-size", o.image_size, "image side length in pixels");
    cmd->add_option("--samples", o.samples, "synthetic samples per task and split");
    cmd->add_option("--views", o.views, "synthetic camera views");
    cmd->add_option("--noise", o.noise, "synthetic noise sigma");
    cmd->add_option("--train-csv", o.train_csv, "annotations of the training split");
    cmd->add_option("--test-csv", o.test_csv, "annotations of the test split");
    cmd->add_option("--image-dir", o.image_dir, "root the CSV image paths are relative to");
}

pipeline::PipelineConfig resolve(const Overrides& o) {
    pipeline::PipelineConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw Error(Errc::Io, "cannot open " + o.config_path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::Parse, o.config_path + ": " + e.what());
        }
        c = pipeline::config_from_json(j, c);
    }
    if (o.seed) c.seed = *o.seed;
    if (o.repeats) c.repeats = *o.repeats;
    if (o.variant) c.variant = pipeline::parse_variant(*o.variant);
    if (o.activation) c.activation = cnn::parse_activation(*o.activation);
    if (o.penalty) c.mtl_penalty = mtl::parse_penalty(*o.penalty);
    if (o.epochs) c.training.epochs = *o.epochs;
    if (o.eta) c.training.eta = *o.eta;
    if (o.image_size) c.training.image_size = *o.image_size;
    if (o.samples) {
        c.scene.n_samples = *o.samples;
        c.scene.n_test = *o.samples;
    }
    if (o.views) {
        c.scene.views = *o.views;
        c.scene.view_offsets.clear();
    }
    if (o.noise) c.scene.noise_sigma = *o.noise;
    if (o.train_csv) c.train_csv = *o.train_csv;
    if (o.test_csv) c.test_csv = *o.test_csv;
    if (o.image_dir) c.image_dir = *o.image_dir;
    pipeline::validate(c);
    return c;
}

int finish(const std::vector<pipeline::EvalReport>& reports, const std::string& out) {
    pipeline::write_results_csv(out, reports);
    std::size_t failed = 0;
    for (const auto& r : reports) {
        std::cout << pipeline::variant_name(r.variant) << ' ' << cnn::activation_name(r.activation) << ' '
                  << mtl::penalty_name(r.penalty) << ": pan MAE " << format_double(r.mean_pan_deg) << " +- "
                  << format_double(r.std_pan_deg) << " deg";
        if (r.incomplete()) std::cout << " (" << r.incomplete() << " repeat(s) aborted)";
        std::cout << '\n';
        failed += r.incomplete();
    }
    std::cout << "wrote " << out << '\n';
    if (failed) {
        std::cerr << "error: " << failed << " repeat(s) aborted\n";
        return 1;
    }
    return 0;
}

std::string repeat_dir(const std::string& root, std::size_t r) {
    return (fs::path(root) / ("repeat" + std::to_string(r))).string();
}

int cmd_gen_data(const Overrides& o, const std::string& preset, const std::string& out) {
    auto c = resolve(o);
    auto scene = c.scene;
    if (preset == "hpid")
        scene = synth::SceneParams::hpid_like();
    else if (preset == "bkhpd")
        scene = synth::SceneParams::bkhpd_like();
    else if (preset == "dpose" && o.config_path.empty())
        scene = synth::SceneParams::dpose_like();
    if (o.samples) scene.n_samples = *o.samples, scene.n_test = *o.samples;
    if (o.noise) scene.noise_sigma = *o.noise;
    scene.image_size = c.training.image_size;
    scene.seed = c.seed;
    const auto data = synth::generate_dataset(scene);
    synth::export_dataset((fs::path(out) / "train").string(), data.train);
    synth::export_dataset((fs::path(out) / "test").string(), data.test);
    std::cout << data.train.size() << " task(s), " << scene.n_samples << " train / " << scene.test_samples()
              << " test samples each\nchecksum " << synth::checksum(data) << '\n';
    return 0;
}

int cmd_train(const Overrides& o, const std::string& out) {
    const auto c = resolve(o);
    fs::create_directories(out);
    {
        std::ofstream cfg(fs::path(out) / "config.json");
        cfg << pipeline::config_to_json(c).dump(2) << '\n';
    }
    for (std::size_t r = 0; r < c.repeats; ++r) {
        const auto data = pipeline::load_repeat_data(c, r);
        std::vector<std::pair<cnn::NetworkSpec, cnn::NetworkState>> nets;
        const auto f = pipeline::stage1_features(c, data, r, &nets);
        const std::string dir = repeat_dir(out, r);
        pipeline::save_features(dir, f);
        for (std::size_t v = 0; v < nets.size(); ++v)
            cnn::save_checkpoint((fs::path(dir) / ("task" + std::to_string(f.task_ids[v]) + ".ckpt")).string(),
                                 nets[v].first, nets[v].second);
        std::cout << "repeat " << r << ": features " << f.checksum() << " -> " << dir << '\n';
    }
    return 0;
}

int cmd_eval(Overrides o, const std::string& features, const std::string& out) {
    if (features.empty()) return finish({pipeline::run_pipeline(resolve(o))}, out);
    const auto saved = fs::path(features) / "config.json";
    if (o.config_path.empty() && fs::exists(saved)) o.config_path = saved.string();
    const auto c = resolve(o);
    std::vector<pipeline::Features> per_repeat;
    for (std::size_t r = 0; r < c.repeats; ++r) per_repeat.push_back(pipeline::load_features(repeat_dir(features, r)));
    return finish({pipeline::evaluate_cached(c, per_repeat)}, out);
}

// Union of three 4-dimensional subspaces in R^40 with a fraction of corrupted samples.
int cmd_lrr_demo(std::uint64_t seed, double lambda, double corrupt, const std::string& out) {
    constexpr std::size_t kDim = 40, kPerSpace = 20, kSpaces = 3, kRank = 4;
    Rng rng(seed);
    Matrix x(kDim, kPerSpace * kSpaces);
    for (std::size_t s = 0; s < kSpaces; ++s) {
        Matrix basis(kDim, kRank), coef(kRank, kPerSpace);
        for (double& v : basis.data()) v = rng.normal();
        for (double& v : coef.data()) v = rng.normal() / std::sqrt(static_cast<double>(kDim));
        const Matrix block = matmul(basis, coef);
        for (std::size_t i = 0; i < kDim; ++i)
            for (std::size_t j = 0; j < kPerSpace; ++j) x(i, s * kPerSpace + j) = block(i, j);
    }
    std::vector<std::size_t> corrupted;
    for (std::size_t j = 0; j < x.cols(); ++j)
        if (rng.uniform() < corrupt) {
            corrupted.push_back(j);
            for (std::size_t i = 0; i < kDim; ++i) x(i, j) += rng.normal();
        }
    const auto result = lrr::solve_lrr({x, x, lambda});
    fs::create_directories(out);
    std::ofstream z(fs::path(out) / "z.csv"), e(fs::path(out) / "e.csv"), trace(fs::path(out) / "trace.csv");
    lrr::write_diagnostics(z, e, trace, result);
    std::cout << "iterations " << result.iterations << (result.converged ? " (converged)" : " (not converged)")
              << "\nresidual ||X-AZ-E||_inf " << format_double(result.residual_data) << "\nresidual ||Z-J||_inf "
              << format_double(result.residual_constraint) << "\nrank(Z*) ";
    const auto svd = thin_svd(result.z_star);
    std::size_t rank = 0;
    for (double s : svd.s) rank += s > 1e-6 * svd.s.front() ? 1 : 0;
    std::cout << rank << "\ncorrupted columns " << corrupted.size() << "\nwrote " << out << '\n';
    return result.converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task manifold deep learning for head pose regression"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "progress messages");
    app.add_flag("-q,--quiet", quiet, "suppress warnings");

    Overrides o;
    std::string out = "results.csv", dir_out = "data", features_dir, preset = "dpose";
    double lambda = 0.3, corrupt = 0.2;
    std::uint64_t demo_seed = 0;

    auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset to PGM + annotations.csv");
    add_config_flags(gen, o);
    gen->add_option("--preset", preset, "dpose, hpid or bkhpd")->check(CLI::IsMember({"dpose", "hpid", "bkhpd"}));
    gen->add_option("-o,--out", dir_out, "output directory (train/ and test/ inside)");

    auto* train = app.add_subcommand("train", "Stage 1: train the per-task CNNs and cache their features");
    add_config_flags(train, o);
    train->add_option("-o,--out", dir_out, "feature cache directory")->required();

    auto* eval = app.add_subcommand("eval", "full pipeline, or Stage 2 only on cached features");
    add_config_flags(eval, o);
    eval->add_option("--features", features_dir, "feature cache written by train")->check(CLI::ExistingDirectory);
    eval->add_option("-o,--out", out, "results CSV");

    auto* acts = app.add_subcommand("compare-activations", "ReLU vs Sigmoid vs Tanh");
    add_config_flags(acts, o);
    acts->add_option("-o,--out", out, "results CSV");

    auto* losses = app.add_subcommand("compare-losses", "the four multi-task penalties on shared features");
    add_config_flags(losses, o);
    losses->add_option("-o,--out", out, "results CSV");

    auto* abl = app.add_subcommand("ablate", "M2DL vs SMDL vs MDL vs TDL");
    add_config_flags(abl, o);
    abl->add_option("-o,--out", out, "results CSV");

    auto* demo = app.add_subcommand("lrr-demo", "low-rank representation of corrupted subspace data");
    demo->add_option("--seed", demo_seed, "seed");
    demo->add_option("--lambda", lambda, "weight of the column-sparse error term");
    demo->add_option("--corrupt", corrupt, "fraction of corrupted samples")->check(CLI::Range(0.0, 1.0));
    demo->add_option("-o,--out", dir_out, "directory for z.csv, e.csv, trace.csv");

    CLI11_PARSE(app, argc, argv);
    set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warn);

    try {
        if (gen->parsed()) return cmd_gen_data(o, preset, dir_out);
        if (train->parsed()) return cmd_train(o, dir_out);
        if (eval->parsed()) return cmd_eval(o, features_dir, out);
        if (acts->parsed()) return finish(pipeline::compare_activations(resolve(o)), out);
        if (losses->parsed()) return finish(pipeline::compare_losses(resolve(o)), out);
        if (abl->parsed()) return finish(pipeline::ablate(resolve(o)), out);
        if (demo->parsed()) return cmd_lrr_demo(demo_seed, lambda, corrupt, dir_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
