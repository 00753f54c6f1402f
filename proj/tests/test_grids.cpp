#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "raindiff/grids.hpp"
#include "raindiff/rng.hpp"

using namespace raindiff;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    const auto p = fs::temp_directory_path() / ("raindiff_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Shared synthetic dataset for the statistics checks.
const DatasetManifest& stats_dataset() {
    static DatasetManifest m =
        gen_synthetic_dataset(7, 512, 0, 32, temp_dir("stats"));
    return m;
}

}  // namespace

TEST_CASE("field save/load roundtrip is bit-identical") {
    const std::string dir = temp_dir("roundtrip");
    Field f(5, 7);
    Rng rng(3);
    for (auto& v : f.values) v = static_cast<float>(std::fabs(rng.normal()) * 10.0);
    save_field(f, dir + "/f.pfld");
    const Field g = load_field(dir + "/f.pfld");
    CHECK(g.height == 5);
    CHECK(g.width == 7);
    CHECK(g.values == f.values);
}

TEST_CASE("load_field rejects wrong magic") {
    const std::string dir = temp_dir("magic");
    std::ofstream out(dir + "/bad.pfld", std::ios::binary);
    out << "NOPE" << std::string(16, '\0');
    out.close();
    CHECK_THROWS_AS((void)load_field(dir + "/bad.pfld"), IoError);
}

TEST_CASE("load_field rejects truncated payload") {
    const std::string dir = temp_dir("trunc");
    Field f(4, 4);
    save_field(f, dir + "/f.pfld");
    fs::resize_file(dir + "/f.pfld", 30);
    CHECK_THROWS_AS((void)load_field(dir + "/f.pfld"), IoError);
}

TEST_CASE("1x1 field serializes to 20 bytes: 8 magic+version, 8 dims, 4 payload") {
    const std::string dir = temp_dir("size");
    Field f(1, 1);
    f.values[0] = 3.5f;
    save_field(f, dir + "/one.pfld");
    CHECK(fs::file_size(dir + "/one.pfld") == 4 + 4 + 4 + 4 + 4);
    CHECK(load_field(dir + "/one.pfld").values[0] == 3.5f);
}

TEST_CASE("make_pair keeps constants and dims") {
    PrecipField hr(64, 64);
    std::fill(hr.values.begin(), hr.values.end(), 5.0f);
    TopoField topo(64, 64);
    const SamplePair p = make_pair(hr, topo, "c");
    CHECK(p.lr.height == 8);
    CHECK(p.lr.width == 8);
    for (const float v : p.lr.values) CHECK(v == 5.0f);
}

TEST_CASE("make_pair approximately conserves the mean of an interior spike") {
    PrecipField hr(32, 32);
    hr.at(15, 17) = 64.0f;
    TopoField topo(32, 32);
    const SamplePair p = make_pair(hr, topo, "spike");
    double hr_mean = 0.0, lr_mean = 0.0;
    for (const float v : hr.values) hr_mean += v;
    for (const float v : p.lr.values) lr_mean += v;
    hr_mean /= static_cast<double>(hr.values.size());
    lr_mean /= static_cast<double>(p.lr.values.size());
    CHECK(std::fabs(lr_mean - hr_mean) / hr_mean < 0.05);
}

TEST_CASE("make_pair rejects indivisible dims") {
    PrecipField hr(63, 63);
    TopoField topo(63, 63);
    CHECK_THROWS_AS((void)make_pair(hr, topo, "bad"), ConfigError);
}

TEST_CASE("make_pair lr matches a scalar bilinear oracle at random pixels") {
    PrecipField hr(32, 32);
    Rng rng(9);
    for (auto& v : hr.values) v = static_cast<float>(std::fabs(rng.normal()) * 4.0);
    TopoField topo(32, 32);
    const SamplePair p = make_pair(hr, topo, "x");

    // Independent scalar bilinear sampler, align-corners-false convention.
    const auto sample = [&](int oy, int ox) {
        const auto coord = [](int d, int in, int out) {
            double s = (d + 0.5) * static_cast<double>(in) / out - 0.5;
            return std::clamp(s, 0.0, static_cast<double>(in - 1));
        };
        const double sy = coord(oy, 32, 4), sx = coord(ox, 32, 4);
        const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
        const int y1 = std::min(y0 + 1, 31), x1 = std::min(x0 + 1, 31);
        const double fy = sy - y0, fx = sx - x0;
        return (1 - fy) * ((1 - fx) * hr.at(y0, x0) + fx * hr.at(y0, x1)) +
               fy * ((1 - fx) * hr.at(y1, x0) + fx * hr.at(y1, x1));
    };
    Rng pick(10);
    for (int i = 0; i < 16; ++i) {
        const int oy = static_cast<int>(pick.uniform_int(0, 3));
        const int ox = static_cast<int>(pick.uniform_int(0, 3));
        CHECK(p.lr.at(oy, ox) == doctest::Approx(sample(oy, ox)).epsilon(1e-5));
    }
}

TEST_CASE("synthetic dataset generation is byte-deterministic") {
    const std::string d1 = temp_dir("det1"), d2 = temp_dir("det2");
    gen_synthetic_dataset(42, 3, 1, 16, d1);
    gen_synthetic_dataset(42, 3, 1, 16, d2);
    for (const auto& name : {"topo.pfld", "train-0000.pfld", "train-0002.pfld", "eval-0000.pfld",
                             "manifest.tsv"})
        CHECK(slurp(d1 + "/" + name) == slurp(d2 + "/" + name));
}

TEST_CASE("synthetic dataset rejects indivisible size") {
    CHECK_THROWS_AS((void)gen_synthetic_dataset(1, 1, 0, 30, temp_dir("badsize")), ConfigError);
}

TEST_CASE("synthetic precipitation is long-tailed (pooled skewness > 1)") {
    const auto& m = stats_dataset();
    double n = 0.0, mean = 0.0;
    for (const auto& e : m.entries) {
        const Field f = load_field(e.hr_path);
        for (const float v : f.values) {
            mean += v;
            n += 1.0;
        }
    }
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (const auto& e : m.entries) {
        const Field f = load_field(e.hr_path);
        for (const float v : f.values) {
            const double d = v - mean;
            m2 += d * d;
            m3 += d * d * d;
        }
    }
    m2 /= n;
    m3 /= n;
    const double skewness = m3 / std::pow(m2, 1.5);
    CHECK(skewness > 1.0);
}

TEST_CASE("synthetic topography correlates with mean precipitation") {
    const auto& m = stats_dataset();
    const Field topo = load_field(m.entries[0].topo_path);
    std::vector<double> mean_precip(topo.size(), 0.0);
    for (const auto& e : m.entries) {
        const Field f = load_field(e.hr_path);
        for (size_t i = 0; i < f.values.size(); ++i) mean_precip[i] += f.values[i];
    }
    for (auto& v : mean_precip) v /= static_cast<double>(m.entries.size());

    // Scalar Pearson correlation oracle.
    double sx = 0.0, sy = 0.0;
    const double n = static_cast<double>(topo.size());
    for (size_t i = 0; i < topo.size(); ++i) {
        sx += topo.values[i];
        sy += mean_precip[i];
    }
    sx /= n;
    sy /= n;
    double cxy = 0.0, cxx = 0.0, cyy = 0.0;
    for (size_t i = 0; i < topo.size(); ++i) {
        const double dx = topo.values[i] - sx, dy = mean_precip[i] - sy;
        cxy += dx * dy;
        cxx += dx * dx;
        cyy += dy * dy;
    }
    const double corr = cxy / std::sqrt(cxx * cyy);
    CHECK(corr > 0.3);
}

TEST_CASE("synthetic values stay non-negative and finite across a 100-seed sweep") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const std::string dir = temp_dir("sweep");
        const auto m = gen_synthetic_dataset(seed, 2, 0, 16, dir);
        for (const auto& e : m.entries) {
            const Field f = load_field(e.hr_path);
            for (const float v : f.values) {
                REQUIRE(std::isfinite(v));
                REQUIRE(v >= 0.0f);
            }
        }
    }
}

TEST_CASE("manifest split is disjoint and exhaustive") {
    const std::string dir = temp_dir("split");
    const auto m = gen_synthetic_dataset(5, 6, 2, 16, dir);
    int train = 0, eval = 0;
    for (const auto& e : m.entries) {
        if (e.split == "train") ++train;
        if (e.split == "eval") ++eval;
    }
    CHECK(train == 6);
    CHECK(eval == 2);
    CHECK(train + eval == static_cast<int>(m.entries.size()));
    CHECK(load_manifest(dir + "/manifest.tsv").seed == 5);
}

TEST_CASE("export_pgm quantization rule") {
    const std::string dir = temp_dir("pgm");
    Field f(1, 3);
    f.values = {0.0f, 5.0f, 10.0f};
    export_pgm(f, dir + "/f.pgm", 10.0f);
    const auto bytes = slurp(dir + "/f.pgm");
    // P5\n3 1\n255\n then three payload bytes
    REQUIRE(bytes.size() >= 3);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + bytes.size() - 3);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);  // vmax/2 rounds half up
    CHECK(px[2] == 255);

    Field zeros(2, 2);
    export_pgm(zeros, dir + "/z.pgm", 1.0f);
    const auto zb = slurp(dir + "/z.pgm");
    for (size_t i = zb.size() - 4; i < zb.size(); ++i) CHECK(zb[i] == 0);
}
