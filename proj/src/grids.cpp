#include "raindiff/grids.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "raindiff/ops.hpp"
#include "raindiff/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "field containers are written little-endian");

namespace raindiff {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'L', 'D'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kMaxDim = 1u << 20;

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path, const char* what) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4))
        throw IoError(path + ": truncated " + what);
    return v;
}

}  // namespace

void save_field(const Field& field, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(field.height));
    write_u32(out, static_cast<uint32_t>(field.width));
    out.write(reinterpret_cast<const char*>(field.values.data()),
              static_cast<std::streamsize>(field.values.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

Field load_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": bad magic, not a PFLD field");
    const uint32_t version = read_u32(in, path, "version");
    if (version != kVersion)
        throw IoError(path + ": unsupported version " + std::to_string(version));
    const uint32_t h = read_u32(in, path, "height");
    const uint32_t w = read_u32(in, path, "width");
    if (h == 0 || w == 0 || h > kMaxDim || w > kMaxDim || static_cast<uint64_t>(h) * w > (1ull << 28))
        throw IoError(path + ": dimension overflow " + std::to_string(h) + "x" + std::to_string(w));
    Field f(static_cast<int>(h), static_cast<int>(w));
    if (!in.read(reinterpret_cast<char*>(f.values.data()),
                 static_cast<std::streamsize>(f.values.size() * sizeof(float))))
        throw IoError(path + ": truncated payload");
    for (const float v : f.values)
        if (!std::isfinite(v)) throw IoError(path + ": non-finite value in payload");
    return f;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "# seed=" << manifest.seed << "\n";
    for (const auto& e : manifest.entries)
        out << e.id << '\t' << e.split << '\t' << e.hr_path << '\t' << e.topo_path << '\n';
    if (!out) throw IoError("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    const std::string dir = std::filesystem::path(path).parent_path().string();
    DatasetManifest m;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("seed=");
            if (pos != std::string::npos) m.seed = std::stoull(line.substr(pos + 5));
            continue;
        }
        std::istringstream ls(line);
        ManifestEntry e;
        if (!std::getline(ls, e.id, '\t') || !std::getline(ls, e.split, '\t') ||
            !std::getline(ls, e.hr_path, '\t') || !std::getline(ls, e.topo_path))
            throw IoError(path + ": malformed manifest line: " + line);
        if (e.split != "train" && e.split != "eval")
            throw IoError(path + ": unknown split '" + e.split + "' for id " + e.id);
        if (!seen.insert(e.id).second) throw IoError(path + ": duplicate id " + e.id);
        if (!dir.empty()) {
            e.hr_path = dir + "/" + e.hr_path;
            e.topo_path = dir + "/" + e.topo_path;
        }
        if (!std::filesystem::exists(e.hr_path)) throw IoError("missing field file: " + e.hr_path);
        if (!std::filesystem::exists(e.topo_path))
            throw IoError("missing field file: " + e.topo_path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

Field downsample8x(const Field& hr) {
    if (hr.height % 8 != 0 || hr.width % 8 != 0)
        throw ConfigError("downsample8x: dims " + std::to_string(hr.height) + "x" +
                          std::to_string(hr.width) + " not divisible by 8");
    // Three bilinear halvings; each 2x step lands mid-pixel and so averages
    // exact 2x2 blocks, which keeps the mass of narrow features instead of
    // skipping between sample points the way a one-shot 8x resize would.
    Tensor t(1, 1, hr.height, hr.width);
    t.values = hr.values;
    for (int step = 0; step < 3; ++step) t = bilinear_resize(t, t.shape[2] / 2, t.shape[3] / 2);
    Field lr(hr.height / 8, hr.width / 8);
    lr.values = std::move(t.values);
    return lr;
}

SamplePair make_pair(const PrecipField& hr, const TopoField& topo, std::string id) {
    if (hr.height % 8 != 0 || hr.width % 8 != 0)
        throw ConfigError("make_pair: hr dims " + std::to_string(hr.height) + "x" +
                          std::to_string(hr.width) + " not divisible by 8");
    if (topo.height != hr.height || topo.width != hr.width)
        throw ShapeError("make_pair: topo dims " + std::to_string(topo.height) + "x" +
                         std::to_string(topo.width) + " do not match hr");
    SamplePair p;
    p.hr = hr;
    p.topo = topo;
    p.lr = downsample8x(hr);
    for (auto& v : p.lr.values) v = std::max(v, 0.0f);
    p.id = std::move(id);
    return p;
}

namespace {

// Separable box blur, replicated borders, window normalized per position.
void box_blur_pass(std::vector<float>& v, int h, int w, int radius) {
    std::vector<float> tmp(v.size());
    for (int y = 0; y < h; ++y) {
        const float* row = v.data() + static_cast<size_t>(y) * w;
        float* dst = tmp.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(0, x - radius), hi = std::min(w - 1, x + radius);
            double s = 0.0;
            for (int i = lo; i <= hi; ++i) s += row[i];
            dst[x] = static_cast<float>(s / (hi - lo + 1));
        }
    }
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            const int lo = std::max(0, y - radius), hi = std::min(h - 1, y + radius);
            double s = 0.0;
            for (int i = lo; i <= hi; ++i) s += tmp[static_cast<size_t>(i) * w + x];
            v[static_cast<size_t>(y) * w + x] = static_cast<float>(s / (hi - lo + 1));
        }
    }
}

void mean_std(const std::vector<float>& v, double& mean, double& stdev) {
    double s = 0.0;
    for (const float x : v) s += x;
    mean = s / static_cast<double>(v.size());
    double q = 0.0;
    for (const float x : v) {
        const double d = x - mean;
        q += d * d;
    }
    stdev = std::sqrt(q / static_cast<double>(v.size()));
}

TopoField make_topography(uint64_t seed, int size) {
    TopoField topo(size, size);
    Rng rng(derive_seed(seed, "topo"));
    constexpr int kBumps = 4;
    for (int b = 0; b < kBumps; ++b) {
        const double cx = rng.uniform() * size;
        const double cy = rng.uniform() * size;
        const double sigma = size / 8.0 + rng.uniform() * (size / 3.0 - size / 8.0);
        const double amp = 200.0 + rng.uniform() * 1000.0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                topo.at(y, x) += static_cast<float>(amp * std::exp(-d2 / (2.0 * sigma * sigma)));
            }
    }
    return topo;
}

PrecipField make_precip(uint64_t sample_seed, int size, const std::vector<float>& topo_norm) {
    PrecipField f(size, size);
    Rng rng(sample_seed);
    rng.fill_normal(f.values);
    const int radius = std::max(1, size / 8);
    for (int pass = 0; pass < 3; ++pass) box_blur_pass(f.values, size, size, radius);
    double mean, stdev;
    mean_std(f.values, mean, stdev);
    const double scale = stdev > 0.0 ? 1.2 / stdev : 0.0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        const double g = (f.values[i] - mean) * scale + 0.5 * topo_norm[i];
        f.values[i] = std::max(static_cast<float>(std::exp(g) - 1.0), 0.0f);
    }
    return f;
}

}  // namespace

DatasetManifest gen_synthetic_dataset(uint64_t seed, int train_count, int eval_count, int size,
                                      const std::string& out_dir) {
    if (size % 8 != 0)
        throw ConfigError("gen_synthetic_dataset: size " + std::to_string(size) +
                          " not divisible by 8");
    if (train_count < 1) throw ConfigError("gen_synthetic_dataset: train count must be >= 1");
    if (eval_count < 0) throw ConfigError("gen_synthetic_dataset: eval count must be >= 0");
    std::filesystem::create_directories(out_dir);

    const TopoField topo = make_topography(seed, size);
    save_field(topo, out_dir + "/topo.pfld");

    double tmean, tstd;
    mean_std(topo.values, tmean, tstd);
    std::vector<float> topo_norm(topo.values.size());
    for (size_t i = 0; i < topo_norm.size(); ++i)
        topo_norm[i] = static_cast<float>((topo.values[i] - tmean) / (tstd > 0.0 ? tstd : 1.0));

    DatasetManifest m;
    m.seed = seed;
    char name[64];
    for (int i = 0; i < train_count + eval_count; ++i) {
        const bool train = i < train_count;
        std::snprintf(name, sizeof(name), "%s-%04d", train ? "train" : "eval",
                      train ? i : i - train_count);
        const PrecipField f = make_precip(derive_seed(seed, name), size, topo_norm);
        save_field(f, out_dir + "/" + name + ".pfld");
        m.entries.push_back({name, train ? "train" : "eval", std::string(name) + ".pfld",
                             "topo.pfld"});
    }
    save_manifest(m, out_dir + "/manifest.tsv");
    // Return with resolved paths, matching what load_manifest produces.
    return load_manifest(out_dir + "/manifest.tsv");
}

void export_pgm(const Field& field, const std::string& path, float vmax) {
    if (!(vmax > 0.0f)) throw ConfigError("export_pgm: vmax must be > 0");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "P5\n" << field.width << " " << field.height << "\n255\n";
    std::vector<unsigned char> row(field.values.size());
    for (size_t i = 0; i < field.values.size(); ++i) {
        const double v = std::max(field.values[i], 0.0f) / vmax;
        row[i] = static_cast<unsigned char>(std::floor(255.0 * std::min(v, 1.0) + 0.5));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!out) throw IoError("write failed: " + path);
}

SamplePair load_pair(const ManifestEntry& entry) {
    PrecipField hr = load_field(entry.hr_path);
    for (const float v : hr.values)
        if (v < 0.0f) throw IoError(entry.hr_path + ": negative precipitation value");
    TopoField topo = load_field(entry.topo_path);
    return make_pair(hr, topo, entry.id);
}

}  // namespace raindiff
