#pragma once

#include "m2dl/cnn.hpp"
#include "m2dl/lrr.hpp"
#include "m2dl/mtl.hpp"
#include "m2dl/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace m2dl::pipeline {

// Ablation axes: manifold regularization (MRCL) on/off x multi-task coupling on/off.
enum class Variant { M2DL, SMDL, MDL, TDL };

std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::M2DL, Variant::SMDL, Variant::MDL, Variant::TDL};

constexpr bool uses_manifold(Variant v) noexcept { return v == Variant::M2DL || v == Variant::SMDL; }
constexpr bool uses_multitask(Variant v) noexcept { return v == Variant::M2DL || v == Variant::MDL; }

struct TrainingOpts {
    std::size_t epochs = 30;
    double eta = 0.01;
    std::size_t batch_size = 32;
    std::size_t image_size = 64;
    // Shift and scale pixels by the training-set mean and deviation (per task),
    // and train the network on standardized pose targets.
    bool standardize_inputs = true;
};

struct MrclSettings {
    double lambda = 0.3;
    std::size_t batch_size = 250;
    bool normalize = true;
    // Represent train and test samples over the task's training features;
    // false makes every batch its own dictionary.
    bool train_dictionary = false;
    // Also regularize the flattened output of every conv layer while the
    // features are extracted. Off by default: each conv layer is an LRR
    // problem in C*H*W dimensions, and Stage 1 runs again for these features.
    bool conv_activations = false;
    lrr::AlmOpts alm;
};

struct PipelineConfig {
    Variant variant = Variant::M2DL;
    cnn::Activation activation = cnn::Activation::ReLU;
    mtl::Penalty mtl_penalty = mtl::Penalty::SparseTrace;
    std::size_t repeats = 20;
    std::uint64_t seed = 0;
    // Solver defaults, with features and targets standardized per task.
    mtl::SolverOpts solver = [] {
        mtl::SolverOpts o;
        o.standardize = true;
        return o;
    }();
    TrainingOpts training;
    MrclSettings mrcl;
    // Synthetic source; its seed field is replaced by a per-repeat seed.
    synth::SceneParams scene = synth::SceneParams::dpose_like();
    // CSV source, used instead of `scene` when train_csv is set.
    std::string train_csv, test_csv, image_dir;

};

void validate(const PipelineConfig& config);

// JSON keys are the field names above; nested structs are nested objects.
// Keys missing from `j` keep the value of `base`; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& config);

std::uint64_t repeat_seed(const PipelineConfig& config, std::size_t repeat);

struct RepeatData {
    std::vector<synth::ImageDataset> train, test;
    std::uint64_t checksum = 0;
};

RepeatData load_repeat_data(const PipelineConfig& config, std::size_t repeat);

// Per-task representation fed to the regression stage.
struct Features {
    std::vector<std::size_t> task_ids;
    std::vector<Matrix> train_x, test_x;  // N x 512
    std::vector<Matrix> train_y, test_y;  // N x 2 (pan, tilt)
    std::uint64_t data_checksum = 0;
    std::size_t unconverged_mrcl_batches = 0;

    std::uint64_t checksum() const;
};

// Stage 1: one CNN per task trained on (pan, tilt), then fully connected features.
// `networks`, when given, receives the trained network of every task. With
// `conv_mrcl`, every conv layer output is passed through MRCL on the way.
Features stage1_features(const PipelineConfig& config, const RepeatData& data, std::size_t repeat,
                         std::vector<std::pair<cnn::NetworkSpec, cnn::NetworkState>>* networks = nullptr,
                         const MrclSettings* conv_mrcl = nullptr);

// MRCL applied to the training and the test features of every task.
Features manifold_features(const Features& raw, const MrclSettings& settings);

struct RepeatRecord {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    double mae_pan_deg = 0.0;
    double mae_tilt_deg = 0.0;
    double wall_ms = 0.0;
    bool ok = false;
    std::string error;
};

struct Stage2Result {
    double mae_pan_deg = 0.0;
    double mae_tilt_deg = 0.0;
};

// Stage 2: the selected penalty across all tasks jointly, or per task when
// `multitask` is false. Errors are mean absolute errors on the test split,
// averaged over tasks.
Stage2Result stage2(const Features& features, bool multitask, mtl::Penalty penalty, const mtl::SolverOpts& opts);

struct EvalReport {
    Variant variant = Variant::M2DL;
    cnn::Activation activation = cnn::Activation::ReLU;
    mtl::Penalty penalty = mtl::Penalty::SparseTrace;
    std::uint64_t seed = 0;
    std::vector<RepeatRecord> repeats;
    // Over successful repeats; std is the sample deviation (0 for one repeat).
    double mean_pan_deg = 0.0, std_pan_deg = 0.0;
    double mean_tilt_deg = 0.0, std_tilt_deg = 0.0;
    double wall_ms = 0.0;
    std::vector<std::uint64_t> data_checksums;     // per repeat
    std::vector<std::uint64_t> feature_checksums;  // per repeat, after MRCL when used

    std::size_t incomplete() const;
    void summarize();
};

// Memoizes Stage 1 (and MRCL) across runs sharing data and training settings.
class FeatureCache {
public:
    const Features& raw(const PipelineConfig& config, std::size_t repeat);
    const Features& manifold(const PipelineConfig& config, std::size_t repeat);
    std::size_t stage1_runs() const noexcept { return stage1_runs_; }

private:
    std::map<std::string, Features> raw_, manifold_;
    std::size_t stage1_runs_ = 0;
};

EvalReport run_pipeline(const PipelineConfig& config, FeatureCache* cache = nullptr);
std::vector<EvalReport> compare_activations(const PipelineConfig& base, FeatureCache* cache = nullptr);
std::vector<EvalReport> compare_losses(const PipelineConfig& base, FeatureCache* cache = nullptr);
std::vector<EvalReport> ablate(const PipelineConfig& base, FeatureCache* cache = nullptr);

// Stage 2 only, from features stored by save_features. Stored features are
// raw, so mrcl.conv_activations cannot be honoured and is rejected.
EvalReport evaluate_cached(const PipelineConfig& config, const std::vector<Features>& per_repeat);

// Header variant,activation,penalty,repeat,mae_pan_deg,mae_tilt_deg,seed,wall_ms,std_pan_deg.
// Per-repeat rows leave std_pan_deg empty; the summary row of each report has
// repeat=-1 and the means. Failed repeats carry empty error columns.
void write_results_csv(std::ostream& out, const std::vector<EvalReport>& reports);
void write_results_csv(const std::string& path, const std::vector<EvalReport>& reports);

// Feature cache on disk: <dir>/task<k>_{train,test}_{x,y}.csv plus meta.txt.
void save_features(const std::string& dir, const Features& features);
Features load_features(const std::string& dir);

}  // namespace m2dl::pipeline
