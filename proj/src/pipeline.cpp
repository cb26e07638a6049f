#include "m2dl/pipeline.hpp"

#include "m2dl/error.hpp"
#include "m2dl/log.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace m2dl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view variant_name(Variant v) noexcept {
    switch (v) {
        case Variant::M2DL: return "M2DL";
        case Variant::SMDL: return "SMDL";
        case Variant::MDL: return "MDL";
        case Variant::TDL: return "TDL";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : kAllVariants)
        if (variant_name(v) == name) return v;
    throw Error(Errc::InvalidArgument, "unknown variant '" + std::string(name) + "' (M2DL, SMDL, MDL, TDL)");
}

void validate(const PipelineConfig& c) {
    if (c.repeats < 1) throw Error(Errc::InvalidArgument, "repeats must be >= 1");
    mtl::validate(c.solver);
    if (c.training.epochs < 1) throw Error(Errc::InvalidArgument, "training.epochs must be >= 1");
    if (!(c.training.eta > 0.0)) throw Error(Errc::InvalidArgument, "training.eta must be > 0");
    if (c.training.batch_size < 1) throw Error(Errc::InvalidArgument, "training.batch_size must be >= 1");
    if (!(c.mrcl.lambda > 0.0)) throw Error(Errc::InvalidArgument, "mrcl.lambda must be > 0");
    if (c.train_csv.empty() != c.test_csv.empty())
        throw Error(Errc::InvalidArgument, "train_csv and test_csv must be given together");
    if (c.train_csv.empty()) {
        auto scene = c.scene;
        scene.image_size = c.training.image_size;
        synth::validate(scene);
    }
    cnn::NetworkSpec::standard(2, c.activation, c.training.image_size).shapes();
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(Errc::Parse, std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw Error(Errc::Parse, "config " + where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool found = false;
        for (const char* k : known) found = found || key == k;
        if (!found) throw Error(Errc::Parse, "unknown config key '" + where + key + "'");
    }
}

std::string take_name(const json& j, const char* key, std::string fallback) {
    take(j, key, fallback);
    return fallback;
}

}  // namespace

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
    reject_unknown(j, {"variant", "activation", "mtl_penalty", "repeats", "seed", "solver", "training", "mrcl",
                       "scene", "train_csv", "test_csv", "image_dir"},
                   "");
    c.variant = parse_variant(take_name(j, "variant", std::string(variant_name(c.variant))));
    c.activation = cnn::parse_activation(take_name(j, "activation", std::string(cnn::activation_name(c.activation))));
    c.mtl_penalty = mtl::parse_penalty(take_name(j, "mtl_penalty", std::string(mtl::penalty_name(c.mtl_penalty))));
    take(j, "repeats", c.repeats);
    take(j, "seed", c.seed);
    take(j, "train_csv", c.train_csv);
    take(j, "test_csv", c.test_csv);
    take(j, "image_dir", c.image_dir);
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        reject_unknown(s, {"rho1", "rho_l2", "gamma", "tau", "max_iter", "tol", "step_init", "standardize"},
                       "solver.");
        take(s, "rho1", c.solver.rho1);
        take(s, "rho_l2", c.solver.rho_l2);
        take(s, "gamma", c.solver.gamma);
        if (s.contains("tau")) {
            if (s.at("tau").is_null())
                c.solver.tau.reset();
            else
                c.solver.tau = s.at("tau").get<double>();
        }
        take(s, "max_iter", c.solver.max_iter);
        take(s, "tol", c.solver.tol);
        take(s, "step_init", c.solver.step_init);
        take(s, "standardize", c.solver.standardize);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        reject_unknown(t, {"epochs", "eta", "batch_size", "image_size", "standardize_inputs"}, "training.");
        take(t, "epochs", c.training.epochs);
        take(t, "eta", c.training.eta);
        take(t, "batch_size", c.training.batch_size);
        take(t, "image_size", c.training.image_size);
        take(t, "standardize_inputs", c.training.standardize_inputs);
    }
    if (j.contains("mrcl")) {
        const json& m = j.at("mrcl");
        reject_unknown(m, {"lambda", "batch_size", "normalize", "train_dictionary", "conv_activations", "mu0", "rho", "mu_max", "tol",
                          "max_iter"},
                      "mrcl.");
        take(m, "lambda", c.mrcl.lambda);
        take(m, "batch_size", c.mrcl.batch_size);
        take(m, "normalize", c.mrcl.normalize);
        take(m, "train_dictionary", c.mrcl.train_dictionary);
        take(m, "conv_activations", c.mrcl.conv_activations);
        take(m, "mu0", c.mrcl.alm.mu0);
        take(m, "rho", c.mrcl.alm.rho);
        take(m, "mu_max", c.mrcl.alm.mu_max);
        take(m, "tol", c.mrcl.alm.tol);
        take(m, "max_iter", c.mrcl.alm.max_iter);
    }
    if (j.contains("scene")) {
        const json& s = j.at("scene");
        reject_unknown(s, {"n_subjects", "n_samples", "n_test", "views", "modals", "pan_range", "tilt_range",
                           "noise_sigma", "view_offsets"},
                       "scene.");
        take(s, "n_subjects", c.scene.n_subjects);
        take(s, "n_samples", c.scene.n_samples);
        if (s.contains("n_test")) {
            if (s.at("n_test").is_null())
                c.scene.n_test.reset();
            else
                c.scene.n_test = s.at("n_test").get<std::size_t>();
        }
        take(s, "views", c.scene.views);
        c.scene.modals = synth::parse_modals(take_name(s, "modals", std::string(synth::modals_name(c.scene.modals))));
        take(s, "pan_range", c.scene.pan_range);
        take(s, "tilt_range", c.scene.tilt_range);
        take(s, "noise_sigma", c.scene.noise_sigma);
        take(s, "view_offsets", c.scene.view_offsets);
    }
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json j;
    j["variant"] = variant_name(c.variant);
    j["activation"] = cnn::activation_name(c.activation);
    j["mtl_penalty"] = mtl::penalty_name(c.mtl_penalty);
    j["repeats"] = c.repeats;
    j["seed"] = c.seed;
    j["solver"] = {{"rho1", c.solver.rho1},
                   {"rho_l2", c.solver.rho_l2},
                   {"gamma", c.solver.gamma},
                   {"tau", c.solver.tau ? json(*c.solver.tau) : json(nullptr)},
                   {"max_iter", c.solver.max_iter},
                   {"tol", c.solver.tol},
                   {"step_init", c.solver.step_init},
                   {"standardize", c.solver.standardize}};
    j["training"] = {{"epochs", c.training.epochs},
                     {"eta", c.training.eta},
                     {"batch_size", c.training.batch_size},
                     {"image_size", c.training.image_size},
                     {"standardize_inputs", c.training.standardize_inputs}};
    j["mrcl"] = {{"lambda", c.mrcl.lambda},     {"batch_size", c.mrcl.batch_size}, {"normalize", c.mrcl.normalize},
                 {"train_dictionary", c.mrcl.train_dictionary}, {"conv_activations", c.mrcl.conv_activations},
                 {"mu0", c.mrcl.alm.mu0},       {"rho", c.mrcl.alm.rho},          {"mu_max", c.mrcl.alm.mu_max},
                 {"tol", c.mrcl.alm.tol},       {"max_iter", c.mrcl.alm.max_iter}};
    j["scene"] = {{"n_subjects", c.scene.n_subjects},
                  {"n_samples", c.scene.n_samples},
                  {"n_test", c.scene.n_test ? json(*c.scene.n_test) : json(nullptr)},
                  {"views", c.scene.views},
                  {"modals", synth::modals_name(c.scene.modals)},
                  {"pan_range", c.scene.pan_range},
                  {"tilt_range", c.scene.tilt_range},
                  {"noise_sigma", c.scene.noise_sigma},
                  {"view_offsets", c.scene.view_offsets}};
    j["train_csv"] = c.train_csv;
    j["test_csv"] = c.test_csv;
    j["image_dir"] = c.image_dir;
    return j;
}

std::uint64_t repeat_seed(const PipelineConfig& config, std::size_t repeat) {
    return derive_seed(config.seed, repeat);
}

RepeatData load_repeat_data(const PipelineConfig& config, std::size_t repeat) {
    RepeatData d;
    if (config.train_csv.empty()) {
        auto scene = config.scene;
        scene.image_size = config.training.image_size;
        scene.seed = derive_seed(repeat_seed(config, repeat), 0);
        auto data = synth::generate_dataset(scene);
        d.train = std::move(data.train);
        d.test = std::move(data.test);
    } else {
        d.train = synth::load_csv_dataset(config.image_dir, config.train_csv, config.training.image_size);
        d.test = synth::load_csv_dataset(config.image_dir, config.test_csv, config.training.image_size);
        if (d.train.empty()) throw Error(Errc::InvalidArgument, config.train_csv + " holds no samples");
        if (d.train.size() != d.test.size())
            throw Error(Errc::InvalidArgument, "training and test CSVs list different task counts");
        for (std::size_t v = 0; v < d.train.size(); ++v)
            if (d.train[v].task_id != d.test[v].task_id)
                throw Error(Errc::InvalidArgument, "training and test CSVs list different tasks");
    }
    d.checksum = synth::checksum(d.train) ^ (synth::checksum(d.test) * 31);
    return d;
}

std::uint64_t Features::checksum() const {
    std::uint64_t h = fnv1a({});
    for (std::size_t v = 0; v < task_ids.size(); ++v) {
        h = fnv1a(train_x[v].data(), h);
        h = fnv1a(test_x[v].data(), h);
        h = fnv1a(train_y[v].data(), h);
        h = fnv1a(test_y[v].data(), h);
    }
    return h;
}

namespace {

void standardize_pixels(Tensor4& train, Tensor4& test) {
    double mean = 0.0;
    for (double v : train.data) mean += v;
    mean /= static_cast<double>(train.data.size());
    double var = 0.0;
    for (double v : train.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(train.data.size()));
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (Tensor4* t : {&train, &test})
        for (double& v : t->data) v = (v - mean) * scale;
}

}  // namespace

namespace {

lrr::MrclOpts mrcl_opts(const MrclSettings& s) {
    lrr::MrclOpts opts;
    opts.alm = s.alm;
    opts.batch_size = s.batch_size;
    opts.normalize = s.normalize;
    return opts;
}

}  // namespace

Features stage1_features(const PipelineConfig& config, const RepeatData& data, std::size_t repeat,
                         std::vector<std::pair<cnn::NetworkSpec, cnn::NetworkState>>* networks,
                         const MrclSettings* conv_mrcl) {
    const std::uint64_t seed = repeat_seed(config, repeat);
    const auto& t = config.training;
    Features f;
    f.data_checksum = data.checksum;
    for (std::size_t v = 0; v < data.train.size(); ++v) {
        const auto& tr = data.train[v];
        const auto& te = data.test[v];
        if (tr.images.n == 0 || te.images.n == 0)
            throw Error(Errc::InvalidArgument, "task " + std::to_string(tr.task_id) + " has an empty split");
        Tensor4 train_images = tr.images, test_images = te.images;
        Matrix targets = tr.poses;
        mtl::ColumnScaler target_scaler;
        if (t.standardize_inputs) {
            standardize_pixels(train_images, test_images);
            target_scaler = mtl::ColumnScaler::fit(targets);
            targets = target_scaler.apply(targets);
        }
        const auto spec = cnn::NetworkSpec::standard(targets.cols(), config.activation, t.image_size);
        const std::uint64_t task_seed = derive_seed(seed, 1 + v);
        auto state = cnn::init_state(spec, task_seed, t.eta);
        for (std::size_t e = 0; e < t.epochs; ++e) {
            auto r = cnn::train_epoch(spec, state, train_images, targets, t.eta, t.batch_size,
                                      derive_seed(task_seed, 1 + e));
            state = std::move(r.state);
            log_info("task " + std::to_string(tr.task_id) + " epoch " + std::to_string(e + 1) + " loss " +
                     format_double(r.mean_loss));
        }
        f.task_ids.push_back(tr.task_id);
        if (conv_mrcl) {
            const auto opts = mrcl_opts(*conv_mrcl);
            const cnn::ConvHook hook = [&](std::size_t, const Matrix& a) {
                auto r = lrr::mrcl_transform_detailed(a, conv_mrcl->lambda, opts);
                f.unconverged_mrcl_batches += r.unconverged_batches;
                return std::move(r.output);
            };
            f.train_x.push_back(cnn::extract_features(spec, state, train_images, hook));
            f.test_x.push_back(cnn::extract_features(spec, state, test_images, hook));
        } else {
            f.train_x.push_back(cnn::extract_features(spec, state, train_images));
            f.test_x.push_back(cnn::extract_features(spec, state, test_images));
        }
        f.train_y.push_back(tr.poses);
        f.test_y.push_back(te.poses);
        if (networks) networks->emplace_back(spec, std::move(state));
    }
    return f;
}

Features manifold_features(const Features& raw, const MrclSettings& s) {
    const auto opts = mrcl_opts(s);
    Features f = raw;
    for (std::size_t v = 0; v < raw.task_ids.size(); ++v) {
        for (auto* x : {&f.train_x[v], &f.test_x[v]}) {
            auto r = s.train_dictionary ? lrr::mrcl_transform_detailed(*x, raw.train_x[v], s.lambda, opts)
                                        : lrr::mrcl_transform_detailed(*x, s.lambda, opts);
            f.unconverged_mrcl_batches += r.unconverged_batches;
            *x = std::move(r.output);
        }
    }
    return f;
}

namespace {

double mean_abs_error(const Matrix& pred, const Matrix& truth, std::size_t col) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i) s += std::abs(pred(i, col) - truth(i, col));
    return s / static_cast<double>(pred.rows());
}

}  // namespace

Stage2Result stage2(const Features& f, bool multitask, mtl::Penalty penalty, const mtl::SolverOpts& opts) {
    const std::size_t tasks = f.task_ids.size();
    if (tasks == 0) throw Error(Errc::InvalidArgument, "stage2: no tasks");
    std::vector<mtl::TaskDataset> data;
    for (std::size_t v = 0; v < tasks; ++v) data.push_back({f.task_ids[v], f.train_x[v], f.train_y[v]});

    std::vector<mtl::MtlModel> models;
    if (multitask) {
        models.push_back(mtl::solve(data, penalty, opts));
    } else {
        for (const auto& d : data) models.push_back(mtl::solve({d}, penalty, opts));
    }
    Stage2Result r;
    for (std::size_t v = 0; v < tasks; ++v) {
        const auto& model = multitask ? models[0] : models[v];
        const Matrix pred = mtl::predict(model, f.test_x[v], f.task_ids[v]);
        r.mae_pan_deg += mean_abs_error(pred, f.test_y[v], 0);
        if (pred.cols() > 1) r.mae_tilt_deg += mean_abs_error(pred, f.test_y[v], 1);
    }
    r.mae_pan_deg /= static_cast<double>(tasks);
    r.mae_tilt_deg /= static_cast<double>(tasks);
    return r;
}

std::size_t EvalReport::incomplete() const {
    std::size_t n = 0;
    for (const auto& r : repeats) n += r.ok ? 0 : 1;
    return n;
}

void EvalReport::summarize() {
    std::vector<double> pan, tilt;
    wall_ms = 0.0;
    for (const auto& r : repeats) {
        wall_ms += r.wall_ms;
        if (!r.ok) continue;
        pan.push_back(r.mae_pan_deg);
        tilt.push_back(r.mae_tilt_deg);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = sd = 0.0;
        if (v.empty()) return;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() < 2) return;
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    };
    stats(pan, mean_pan_deg, std_pan_deg);
    stats(tilt, mean_tilt_deg, std_tilt_deg);
}

namespace {

std::string stage1_key(const PipelineConfig& c, std::size_t repeat) {
    json j = config_to_json(c);
    j.erase("variant");
    j.erase("mtl_penalty");
    j.erase("solver");
    j.erase("mrcl");
    j.erase("repeats");
    j["repeat"] = repeat;
    return j.dump();
}

std::string manifold_key(const PipelineConfig& c, std::size_t repeat) {
    return stage1_key(c, repeat) + config_to_json(c).at("mrcl").dump();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

const Features& FeatureCache::raw(const PipelineConfig& config, std::size_t repeat) {
    const std::string key = stage1_key(config, repeat);
    auto it = raw_.find(key);
    if (it == raw_.end()) {
        const RepeatData data = load_repeat_data(config, repeat);
        ++stage1_runs_;
        it = raw_.emplace(key, stage1_features(config, data, repeat)).first;
    }
    return it->second;
}

const Features& FeatureCache::manifold(const PipelineConfig& config, std::size_t repeat) {
    const std::string key = manifold_key(config, repeat);
    auto it = manifold_.find(key);
    if (it == manifold_.end()) {
        if (config.mrcl.conv_activations) {
            const RepeatData data = load_repeat_data(config, repeat);
            ++stage1_runs_;
            const auto conv = stage1_features(config, data, repeat, nullptr, &config.mrcl);
            it = manifold_.emplace(key, manifold_features(conv, config.mrcl)).first;
        } else {
            it = manifold_.emplace(key, manifold_features(raw(config, repeat), config.mrcl)).first;
        }
    }
    return it->second;
}

namespace {

EvalReport empty_report(const PipelineConfig& c) {
    EvalReport r;
    r.variant = c.variant;
    r.activation = c.activation;
    r.penalty = c.mtl_penalty;
    r.seed = c.seed;
    return r;
}

// Runs every config over all repeats, sharing one Stage 1 per repeat among
// configs whose features coincide.
std::vector<EvalReport> run_group(const std::vector<PipelineConfig>& configs, FeatureCache* shared) {
    FeatureCache local;
    FeatureCache& cache = shared ? *shared : local;
    std::vector<EvalReport> reports;
    for (const auto& c : configs) {
        validate(c);
        reports.push_back(empty_report(c));
    }
    const std::size_t repeats = configs.front().repeats;
    for (std::size_t r = 0; r < repeats; ++r) {
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const auto& c = configs[k];
            RepeatRecord rec;
            rec.repeat = r;
            rec.seed = repeat_seed(c, r);
            const auto start = std::chrono::steady_clock::now();
            try {
                const Features& f = uses_manifold(c.variant) ? cache.manifold(c, r) : cache.raw(c, r);
                if (f.unconverged_mrcl_batches)
                    log_warn(std::to_string(f.unconverged_mrcl_batches) + " MRCL batch(es) did not converge");
                const auto s2 = stage2(f, uses_multitask(c.variant), c.mtl_penalty, c.solver);
                rec.mae_pan_deg = s2.mae_pan_deg;
                rec.mae_tilt_deg = s2.mae_tilt_deg;
                rec.ok = true;
                reports[k].data_checksums.push_back(f.data_checksum);
                reports[k].feature_checksums.push_back(f.checksum());
            } catch (const std::exception& e) {
                rec.error = e.what();
                reports[k].data_checksums.push_back(0);
                reports[k].feature_checksums.push_back(0);
                log_warn(std::string(variant_name(c.variant)) + " repeat " + std::to_string(r) + " aborted: " +
                         e.what());
            }
            rec.wall_ms = elapsed_ms(start);
            reports[k].repeats.push_back(std::move(rec));
        }
    }
    for (auto& rep : reports) rep.summarize();
    return reports;
}

}  // namespace

EvalReport run_pipeline(const PipelineConfig& config, FeatureCache* cache) {
    return run_group({config}, cache).front();
}

std::vector<EvalReport> compare_activations(const PipelineConfig& base, FeatureCache* cache) {
    std::vector<PipelineConfig> configs;
    for (auto a : cnn::kAllActivations) {
        configs.push_back(base);
        configs.back().activation = a;
    }
    return run_group(configs, cache);
}

std::vector<EvalReport> compare_losses(const PipelineConfig& base, FeatureCache* cache) {
    std::vector<PipelineConfig> configs;
    for (auto p : mtl::kAllPenalties) {
        configs.push_back(base);
        configs.back().mtl_penalty = p;
    }
    return run_group(configs, cache);
}

std::vector<EvalReport> ablate(const PipelineConfig& base, FeatureCache* cache) {
    std::vector<PipelineConfig> configs;
    for (auto v : kAllVariants) {
        configs.push_back(base);
        configs.back().variant = v;
    }
    return run_group(configs, cache);
}

EvalReport evaluate_cached(const PipelineConfig& config, const std::vector<Features>& per_repeat) {
    if (uses_manifold(config.variant) && config.mrcl.conv_activations)
        throw Error(Errc::InvalidArgument,
                    "evaluate_cached: stored features are raw; mrcl.conv_activations needs a full run");
    EvalReport report = empty_report(config);
    for (std::size_t r = 0; r < per_repeat.size(); ++r) {
        RepeatRecord rec;
        rec.repeat = r;
        rec.seed = repeat_seed(config, r);
        const auto start = std::chrono::steady_clock::now();
        try {
            const Features f = uses_manifold(config.variant) ? manifold_features(per_repeat[r], config.mrcl)
                                                             : per_repeat[r];
            const auto s2 = stage2(f, uses_multitask(config.variant), config.mtl_penalty, config.solver);
            rec.mae_pan_deg = s2.mae_pan_deg;
            rec.mae_tilt_deg = s2.mae_tilt_deg;
            rec.ok = true;
            report.data_checksums.push_back(f.data_checksum);
            report.feature_checksums.push_back(f.checksum());
        } catch (const std::exception& e) {
            rec.error = e.what();
            report.data_checksums.push_back(0);
            report.feature_checksums.push_back(0);
            log_warn(std::string("repeat ") + std::to_string(r) + " aborted: " + e.what());
        }
        rec.wall_ms = elapsed_ms(start);
        report.repeats.push_back(std::move(rec));
    }
    report.summarize();
    return report;
}

void write_results_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << "variant,activation,penalty,repeat,mae_pan_deg,mae_tilt_deg,seed,wall_ms,std_pan_deg\n";
    for (const auto& rep : reports) {
        const std::string prefix = std::string(variant_name(rep.variant)) + "," +
                                   std::string(cnn::activation_name(rep.activation)) + "," +
                                   std::string(mtl::penalty_name(rep.penalty)) + ",";
        for (const auto& r : rep.repeats) {
            out << prefix << r.repeat << ',';
            if (r.ok)
                out << format_double(r.mae_pan_deg) << ',' << format_double(r.mae_tilt_deg);
            else
                out << ',';
            out << ',' << r.seed << ',' << static_cast<long long>(std::llround(r.wall_ms)) << ",\n";
        }
        out << prefix << "-1," << format_double(rep.mean_pan_deg) << ',' << format_double(rep.mean_tilt_deg) << ','
            << rep.seed << ',' << static_cast<long long>(std::llround(rep.wall_ms)) << ','
            << format_double(rep.std_pan_deg) << '\n';
    }
}

void write_results_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    write_results_csv(out, reports);
    if (!out) throw Error(Errc::Io, "failed writing " + path);
}

void save_features(const std::string& dir, const Features& f) {
    fs::create_directories(dir);
    const fs::path root(dir);
    {
        std::ofstream meta(root / "meta.txt");
        if (!meta) throw Error(Errc::Io, "cannot write " + (root / "meta.txt").string());
        meta << "m2dl-features 1\n";
        meta << "data_checksum " << f.data_checksum << '\n';
        meta << "tasks";
        for (auto id : f.task_ids) meta << ' ' << id;
        meta << '\n';
    }
    for (std::size_t v = 0; v < f.task_ids.size(); ++v) {
        const std::string stem = "task" + std::to_string(f.task_ids[v]);
        write_csv((root / (stem + "_train_x.csv")).string(), f.train_x[v]);
        write_csv((root / (stem + "_test_x.csv")).string(), f.test_x[v]);
        write_csv((root / (stem + "_train_y.csv")).string(), f.train_y[v]);
        write_csv((root / (stem + "_test_y.csv")).string(), f.test_y[v]);
    }
}

Features load_features(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream meta(root / "meta.txt");
    if (!meta) throw Error(Errc::Io, "no feature cache in " + dir);
    std::string line, word;
    Features f;
    if (!std::getline(meta, line) || line != "m2dl-features 1")
        throw Error(Errc::Parse, (root / "meta.txt").string() + ": not a feature cache");
    if (!(meta >> word >> f.data_checksum) || word != "data_checksum")
        throw Error(Errc::Parse, (root / "meta.txt").string() + ": missing data_checksum");
    std::getline(meta, line);
    if (!std::getline(meta, line)) throw Error(Errc::Parse, (root / "meta.txt").string() + ": missing tasks");
    std::istringstream ids(line);
    ids >> word;
    for (std::size_t id; ids >> id;) f.task_ids.push_back(id);
    for (auto id : f.task_ids) {
        const std::string stem = "task" + std::to_string(id);
        f.train_x.push_back(read_csv((root / (stem + "_train_x.csv")).string()));
        f.test_x.push_back(read_csv((root / (stem + "_test_x.csv")).string()));
        f.train_y.push_back(read_csv((root / (stem + "_train_y.csv")).string()));
        f.test_y.push_back(read_csv((root / (stem + "_test_y.csv")).string()));
    }
    return f;
}

}  // namespace m2dl::pipeline
