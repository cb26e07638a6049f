#include "m2dl/synth.hpp"

#include "m2dl/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace m2dl::synth {

namespace fs = std::filesystem;

std::string_view modals_name(Modals m) noexcept {
    return m == Modals::Gray ? "Gray" : "GrayPlusDepth";
}

Modals parse_modals(std::string_view name) {
    if (name == "Gray") return Modals::Gray;
    if (name == "GrayPlusDepth") return Modals::GrayPlusDepth;
    throw Error(Errc::InvalidArgument, "unknown modals '" + std::string(name) + "'");
}

std::vector<double> SceneParams::offsets() const {
    if (!view_offsets.empty()) return view_offsets;
    std::vector<double> out(views);
    for (std::size_t v = 0; v < views; ++v) out[v] = 360.0 * static_cast<double>(v) / static_cast<double>(views);
    return out;
}

SceneParams SceneParams::dpose_like() {
    SceneParams p;
    p.views = 4;
    p.n_samples = 500;
    p.n_test = 500;
    return p;
}

SceneParams SceneParams::hpid_like() {
    SceneParams p;
    p.views = 3;
    p.n_samples = 465;
    p.n_test = 465;
    return p;
}

SceneParams SceneParams::bkhpd_like() {
    SceneParams p;
    p.views = 1;
    p.modals = Modals::GrayPlusDepth;
    p.n_samples = 400;
    p.n_test = 465;
    p.pan_range = {-75.0, 75.0};
    return p;
}

void validate(const SceneParams& p) {
    if (p.views < 1) throw Error(Errc::InvalidArgument, "views must be >= 1");
    if (p.n_subjects < 1) throw Error(Errc::InvalidArgument, "n_subjects must be >= 1");
    if (!(p.pan_range.first < p.pan_range.second) || !(p.tilt_range.first < p.tilt_range.second))
        throw Error(Errc::InvalidArgument, "pose ranges need lo < hi");
    if (!(p.noise_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "noise_sigma must be >= 0");
    if (p.image_size < 4) throw Error(Errc::InvalidArgument, "image_size must be >= 4");
    if (!p.view_offsets.empty() && p.view_offsets.size() != p.views)
        throw Error(Errc::InvalidArgument, "view_offsets must have one entry per view");
}

HeadShape HeadShape::for_subject(std::uint64_t seed, std::size_t subject) {
    Rng rng(derive_seed(seed, 0x5eed0000ULL + subject));
    HeadShape s;
    s.width *= rng.uniform(0.92, 1.08);
    s.height *= rng.uniform(0.92, 1.08);
    s.depth *= rng.uniform(0.92, 1.08);
    s.eye_spacing *= rng.uniform(0.9, 1.1);
    s.skin = rng.uniform(0.75, 0.95);
    s.hair = rng.uniform(0.15, 0.4);
    return s;
}

namespace {

using Vec3 = std::array<double, 3>;

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Ellipsoid {
    Vec3 center;
    Vec3 axes;
};

// Nearest positive hit distance of the ray o + t d, or +inf.
double intersect(const Ellipsoid& e, const Vec3& o, const Vec3& d) {
    Vec3 os, ds;
    for (int k = 0; k < 3; ++k) {
        os[k] = (o[k] - e.center[k]) / e.axes[k];
        ds[k] = d[k] / e.axes[k];
    }
    const double a = dot3(ds, ds), b = 2.0 * dot3(os, ds), c = dot3(os, os) - 1.0;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return INFINITY;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    return t > 0.0 ? t : INFINITY;
}

double blob(const Vec3& p, const Vec3& c, double sx, double sy, double sz) {
    const double dx = (p[0] - c[0]) / sx, dy = (p[1] - c[1]) / sy, dz = (p[2] - c[2]) / sz;
    return std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix render_head(double pan, double tilt, double view_offset, Modality modality, double noise_sigma,
                   Rng& rng, const HeadShape& shape, std::size_t image_size) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double yaw = (pan + view_offset) * deg, pitch = tilt * deg;
    const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
    // World-from-head rotation R = R_y(yaw) * R_x(pitch); rows below.
    const std::array<Vec3, 3> rot{{{cy, sy * sp, sy * cp}, {0.0, cp, -sp}, {-sy, cy * sp, cy * cp}}};
    auto to_head = [&](const Vec3& v) {  // R^T v
        return Vec3{rot[0][0] * v[0] + rot[1][0] * v[1] + rot[2][0] * v[2],
                    rot[0][1] * v[0] + rot[1][1] * v[1] + rot[2][1] * v[2],
                    rot[0][2] * v[0] + rot[1][2] * v[1] + rot[2][2] * v[2]};
    };
    auto to_world = [&](const Vec3& v) { return Vec3{dot3(rot[0], v), dot3(rot[1], v), dot3(rot[2], v)}; };

    const double w = shape.width, h = shape.height, d = shape.depth;
    const std::array<Ellipsoid, 4> parts{{
        {{0.0, 0.0, 0.0}, {w, h, d}},                         // skull
        {{0.0, -0.05 * h / 0.7, 0.93 * d}, {0.07, 0.13, 0.16}},  // nose
        {{-w, 0.0, -0.05}, {0.06, 0.14, 0.10}},               // ears
        {{w, 0.0, -0.05}, {0.06, 0.14, 0.10}},
    }};
    auto surface_z = [&](double x, double y) {
        return d * std::sqrt(std::max(0.0, 1.0 - (x / w) * (x / w) - (y / h) * (y / h)));
    };
    const double ey = 0.12 * h / 0.7, my = -0.32 * h / 0.7;
    const Vec3 eye_l{-shape.eye_spacing, ey, surface_z(-shape.eye_spacing, ey)};
    const Vec3 eye_r{shape.eye_spacing, ey, surface_z(shape.eye_spacing, ey)};
    const Vec3 mouth{0.0, my, surface_z(0.0, my)};

    Vec3 light{0.0, 0.45, 1.0};
    const double ln = std::sqrt(dot3(light, light));
    for (double& v : light) v /= ln;

    constexpr double kCameraZ = 3.0;
    const Vec3 dir_h = to_head({0.0, 0.0, -1.0});
    const auto n = static_cast<double>(image_size);
    Matrix img(image_size, image_size);
    for (std::size_t r = 0; r < image_size; ++r) {
        const double v = 1.0 - 2.0 * (static_cast<double>(r) + 0.5) / n;
        for (std::size_t c = 0; c < image_size; ++c) {
            const double u = 2.0 * (static_cast<double>(c) + 0.5) / n - 1.0;
            const Vec3 o_h = to_head({u, v, kCameraZ});
            double best = INFINITY;
            std::size_t hit = 0;
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const double t = intersect(parts[k], o_h, dir_h);
                if (t < best) {
                    best = t;
                    hit = k;
                }
            }
            double value = 0.0;
            if (std::isfinite(best)) {
                const Vec3 p{o_h[0] + best * dir_h[0], o_h[1] + best * dir_h[1], o_h[2] + best * dir_h[2]};
                if (modality == Modality::Depth) {
                    value = 0.5 * (kCameraZ - best + 1.0);
                } else {
                    const Ellipsoid& e = parts[hit];
                    Vec3 nrm;
                    for (int k = 0; k < 3; ++k) nrm[k] = (p[k] - e.center[k]) / (e.axes[k] * e.axes[k]);
                    const double nn = std::sqrt(dot3(nrm, nrm));
                    for (double& x : nrm) x /= nn;
                    double albedo = shape.skin;
                    if (hit == 0) {
                        const double back = logistic(-(p[2] / d + 0.1) / 0.05);
                        const double top = logistic((p[1] / h - 0.55) / 0.05);
                        const double hairness = std::max(back, top);
                        const double phi = std::atan2(std::abs(p[0]), -p[2]);
                        const double hair = shape.hair * (1.0 + 0.35 * std::cos(8.0 * phi));
                        albedo = (1.0 - hairness) * shape.skin + hairness * hair;
                        const double marks = std::max({blob(p, eye_l, 0.055, 0.04, 0.05), blob(p, eye_r, 0.055, 0.04, 0.05),
                                                       blob(p, mouth, 0.11, 0.035, 0.05)});
                        albedo *= 1.0 - 0.75 * marks;
                    }
                    const double lambert = std::max(0.0, dot3(to_world(nrm), light));
                    value = albedo * (0.2 + 0.8 * lambert);
                }
            }
            if (noise_sigma > 0.0) value += noise_sigma * rng.normal();
            img(r, c) = value;
        }
    }
    return img;
}

namespace {

double quantize16(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

struct HeadState {
    double pan, tilt;
    std::size_t subject;
};

std::vector<HeadState> sample_states(const SceneParams& p, std::size_t count, Rng& rng) {
    std::vector<HeadState> out(count);
    for (auto& s : out) {
        s.pan = rng.uniform(p.pan_range.first, p.pan_range.second);
        s.tilt = rng.uniform(p.tilt_range.first, p.tilt_range.second);
        s.subject = static_cast<std::size_t>(rng.below(p.n_subjects));
    }
    return out;
}

ImageDataset render_split(const SceneParams& p, const std::vector<HeadState>& states,
                          const std::vector<HeadShape>& shapes, std::size_t task_id, double offset,
                          Modality modality, Rng& noise) {
    ImageDataset ds;
    ds.task_id = task_id;
    ds.images = Tensor4(states.size(), 1, p.image_size, p.image_size);
    ds.poses = Matrix(states.size(), 2);
    for (std::size_t i = 0; i < states.size(); ++i) {
        const Matrix img = render_head(states[i].pan, states[i].tilt, offset, modality, p.noise_sigma, noise,
                                       shapes[states[i].subject], p.image_size);
        auto dst = ds.images.sample(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = quantize16(img.data()[k]);
        ds.poses(i, 0) = states[i].pan;
        ds.poses(i, 1) = states[i].tilt;
        ds.subjects.push_back(states[i].subject);
    }
    return ds;
}

}  // namespace

MultiTaskData generate_dataset(const SceneParams& p) {
    validate(p);
    Rng pose_rng(derive_seed(p.seed, 0));
    const auto train_states = sample_states(p, p.n_samples, pose_rng);
    const auto test_states = sample_states(p, p.test_samples(), pose_rng);
    std::vector<HeadShape> shapes;
    for (std::size_t s = 0; s < p.n_subjects; ++s) shapes.push_back(HeadShape::for_subject(p.seed, s));

    const auto offsets = p.offsets();
    const std::size_t modal_count = p.modals == Modals::GrayPlusDepth ? 2 : 1;
    MultiTaskData data;
    for (std::size_t v = 0; v < p.views; ++v)
        for (std::size_t m = 0; m < modal_count; ++m) {
            const std::size_t task = v * modal_count + m;
            const Modality modality = m == 0 ? Modality::Gray : Modality::Depth;
            Rng noise(derive_seed(p.seed, 100 + task));
            data.train.push_back(render_split(p, train_states, shapes, task + 1, offsets[v], modality, noise));
            data.test.push_back(render_split(p, test_states, shapes, task + 1, offsets[v], modality, noise));
        }
    return data;
}

void write_pgm16(const std::string& path, const Matrix& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
    for (double v : image.data()) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
        const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        out.write(bytes, 2);
    }
    if (!out) throw Error(Errc::Io, "failed writing " + path);
}

Matrix read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    auto token = [&]() {
        std::string t;
        char ch;
        while (in.get(ch)) {
            if (ch == '#') {
                std::string skip;
                std::getline(in, skip);
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!t.empty()) break;
            } else {
                t.push_back(ch);
            }
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P2") throw Error(Errc::Parse, path + ": not a PGM file");
    std::size_t width = 0, height = 0;
    unsigned long maxval = 0;
    try {
        width = std::stoul(token());
        height = std::stoul(token());
        maxval = std::stoul(token());
    } catch (const std::exception&) {
        throw Error(Errc::Parse, path + ": bad PGM header");
    }
    if (width == 0 || height == 0 || maxval == 0 || maxval > 65535)
        throw Error(Errc::Parse, path + ": bad PGM header");
    Matrix img(height, width);
    const auto denom = static_cast<double>(maxval);
    for (double& v : img.data()) {
        unsigned long q = 0;
        if (magic == "P2") {
            const std::string t = token();
            if (t.empty()) throw Error(Errc::Parse, path + ": truncated PGM");
            q = std::stoul(t);
        } else if (maxval > 255) {
            unsigned char b[2];
            if (!in.read(reinterpret_cast<char*>(b), 2)) throw Error(Errc::Parse, path + ": truncated PGM");
            q = (static_cast<unsigned long>(b[0]) << 8) | b[1];
        } else {
            unsigned char b;
            if (!in.read(reinterpret_cast<char*>(&b), 1)) throw Error(Errc::Parse, path + ": truncated PGM");
            q = b;
        }
        v = static_cast<double>(q) / denom;
    }
    return img;
}

void export_dataset(const std::string& root, const std::vector<ImageDataset>& tasks) {
    fs::create_directories(root);
    std::ofstream csv(fs::path(root) / "annotations.csv");
    if (!csv) throw Error(Errc::Io, "cannot write annotations in " + root);
    csv << "path,task,pan,tilt\n";
    for (const auto& t : tasks) {
        const std::string dir = "task" + std::to_string(t.task_id);
        fs::create_directories(fs::path(root) / dir);
        for (std::size_t i = 0; i < t.images.n; ++i) {
            const std::string rel = dir + "/img" + std::to_string(i) + ".pgm";
            Matrix img(t.images.h, t.images.w, std::vector<double>(t.images.sample(i).begin(), t.images.sample(i).end()));
            write_pgm16((fs::path(root) / rel).string(), img);
            csv << rel << ',' << t.task_id << ',' << format_double(t.poses(i, 0)) << ','
                << format_double(t.poses(i, 1)) << '\n';
        }
    }
}

std::vector<ImageDataset> load_csv_dataset(const std::string& image_dir, const std::string& annotations_csv,
                                           std::size_t image_size) {
    std::ifstream in(annotations_csv);
    if (!in) throw Error(Errc::Io, "cannot open " + annotations_csv);
    struct Row {
        std::string path;
        std::size_t task;
        double pan, tilt;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header) {
            if (line != "path,task,pan,tilt")
                throw Error(Errc::Parse, annotations_csv + " line 1: expected header 'path,task,pan,tilt'");
            header = true;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        auto bad = [&](const std::string& why) {
            return Error(Errc::Parse, annotations_csv + " line " + std::to_string(lineno) + ": " + why);
        };
        if (cells.size() != 4 || cells[0].empty()) throw bad("expected 4 fields path,task,pan,tilt");
        Row r;
        r.path = cells[0];
        char* end = nullptr;
        const unsigned long long task = std::strtoull(cells[1].c_str(), &end, 10);
        if (cells[1].empty() || *end != '\0') throw bad("bad task '" + cells[1] + "'");
        r.task = static_cast<std::size_t>(task);
        r.pan = std::strtod(cells[2].c_str(), &end);
        if (cells[2].empty() || *end != '\0') throw bad("bad pan '" + cells[2] + "'");
        r.tilt = std::strtod(cells[3].c_str(), &end);
        if (cells[3].empty() || *end != '\0') throw bad("bad tilt '" + cells[3] + "'");
        rows.push_back(std::move(r));
    }

    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() ? path : fs::path(image_dir) / path;
    };
    std::vector<std::string> missing;
    for (const auto& r : rows)
        if (!fs::exists(resolve(r.path))) missing.push_back(resolve(r.path).string());
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " missing image(s):";
        for (const auto& m : missing) msg += " " + m;
        throw Error(Errc::Io, msg);
    }

    std::map<std::size_t, std::vector<const Row*>> by_task;
    for (const auto& r : rows) by_task[r.task].push_back(&r);
    std::vector<ImageDataset> out;
    for (const auto& [task, members] : by_task) {
        ImageDataset ds;
        ds.task_id = task;
        ds.images = Tensor4(members.size(), 1, image_size, image_size);
        ds.poses = Matrix(members.size(), 2);
        ds.subjects.assign(members.size(), 0);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const Matrix img = read_pgm(resolve(members[i]->path).string());
            auto dst = ds.images.sample(i);
            for (std::size_t r = 0; r < image_size; ++r) {
                const std::size_t sr = (2 * r + 1) * img.rows() / (2 * image_size);
                for (std::size_t c = 0; c < image_size; ++c) {
                    const std::size_t sc = (2 * c + 1) * img.cols() / (2 * image_size);
                    dst[r * image_size + c] = img(sr, sc);
                }
            }
            ds.poses(i, 0) = members[i]->pan;
            ds.poses(i, 1) = members[i]->tilt;
        }
        out.push_back(std::move(ds));
    }
    return out;
}

std::uint64_t checksum(const std::vector<ImageDataset>& tasks) {
    std::uint64_t h = fnv1a({});
    for (const auto& t : tasks) {
        h = fnv1a(t.images.data, h);
        h = fnv1a(t.poses.data(), h);
    }
    return h;
}

std::uint64_t checksum(const MultiTaskData& data) {
    const std::vector<double> marker{static_cast<double>(data.train.size()), static_cast<double>(data.test.size())};
    return fnv1a(marker, checksum(data.train) ^ (checksum(data.test) * 31));
}

}  // namespace m2dl::synth
