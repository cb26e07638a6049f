#pragma once

#include "m2dl/rng.hpp"
#include "m2dl/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace m2dl::synth {

enum class Modality { Gray, Depth };
enum class Modals { Gray, GrayPlusDepth };

std::string_view modals_name(Modals m) noexcept;  // "Gray", "GrayPlusDepth"
Modals parse_modals(std::string_view name);

struct SceneParams {
    std::size_t n_subjects = 1;
    std::size_t n_samples = 500;           // training samples per task
    std::optional<std::size_t> n_test;     // test samples per task; defaults to n_samples
    std::size_t views = 4;
    Modals modals = Modals::Gray;
    std::pair<double, double> pan_range{-90.0, 90.0};
    std::pair<double, double> tilt_range{-60.0, 60.0};
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
    std::size_t image_size = 64;
    // Pan offset of each camera in degrees; defaults to 360 / views spacing.
    std::vector<double> view_offsets;

    std::size_t num_tasks() const noexcept { return views * (modals == Modals::GrayPlusDepth ? 2 : 1); }
    std::size_t test_samples() const noexcept { return n_test.value_or(n_samples); }
    std::vector<double> offsets() const;

    static SceneParams dpose_like();  // 4 cameras, 500 / 500
    static SceneParams hpid_like();   // 3 views, 465 / 465
    static SceneParams bkhpd_like();  // gray + depth modals, 400 / 465
};

void validate(const SceneParams& params);

// Per-subject head geometry.
struct HeadShape {
    double width = 0.55, height = 0.70, depth = 0.60;
    double eye_spacing = 0.20;
    double skin = 0.85, hair = 0.30;

    static HeadShape for_subject(std::uint64_t seed, std::size_t subject);
};

// Orthographic render of an ellipsoid head with nose, ears, eyes, mouth and
// hair, rotated by (pan + view_offset, tilt). Gray renders Lambertian
// intensity, Depth the z-buffer. Noise is additive Gaussian; no clamping.
Matrix render_head(double pan, double tilt, double view_offset, Modality modality, double noise_sigma,
                   Rng& rng, const HeadShape& shape = {}, std::size_t image_size = 64);

// Images of one task. poses has columns (pan, tilt) in degrees.
struct ImageDataset {
    std::size_t task_id = 1;
    Tensor4 images;  // N x 1 x S x S, intensities in [0, 1]
    Matrix poses;    // N x 2
    std::vector<std::size_t> subjects;
};

struct MultiTaskData {
    std::vector<ImageDataset> train;
    std::vector<ImageDataset> test;
};

// Per task: n_samples training and test_samples() test images. Sample i shows
// the same head state (subject, pan, tilt) in every task. Pixels are quantized
// to 16 bits so that PGM export is lossless.
MultiTaskData generate_dataset(const SceneParams& params);

// Writes <root>/task<k>/img<i>.pgm (16-bit) and <root>/annotations.csv with
// header path,task,pan,tilt.
void export_dataset(const std::string& root, const std::vector<ImageDataset>& tasks);

// Reads a split written by export_dataset (or any CSV with the same columns;
// paths are relative to image_dir unless absolute). Images whose size differs
// from image_size are resized by nearest neighbour.
std::vector<ImageDataset> load_csv_dataset(const std::string& image_dir, const std::string& annotations_csv,
                                           std::size_t image_size = 64);

Matrix read_pgm(const std::string& path);
void write_pgm16(const std::string& path, const Matrix& image);

std::uint64_t checksum(const std::vector<ImageDataset>& tasks);
std::uint64_t checksum(const MultiTaskData& data);

}  // namespace m2dl::synth
