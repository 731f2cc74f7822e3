#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "bcp/datakit.hpp"

using namespace bcp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bcp_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str(const std::string& leaf = "") const {
        return leaf.empty() ? path.string() : (path / leaf).string();
    }
};

}  // namespace

TEST_CASE("split names round trip") {
    for (Split s : {Split::labeled, Split::unlabeled, Split::val, Split::test})
        CHECK(split_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(split_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("f32 volume round trip is bit exact after float quantization") {
    TempDir td;
    std::vector<double> vals;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0, 1);
    for (int i = 0; i < 24; ++i) vals.push_back((double)(float)dist(rng));
    save_volume(td.str("v.bin"), {4, 6}, vals, VolumeDtype::f32);
    LoadedVolume lv = load_volume(td.str("v.bin"));
    CHECK(lv.dtype == VolumeDtype::f32);
    CHECK(lv.shape == std::vector<std::size_t>{4, 6});
    CHECK(lv.values == vals);  // exact: inputs were already f32-representable
}

TEST_CASE("u8 label volume round trip") {
    TempDir td;
    LabelMap lm{{2, 3}, {0, 1, 2, 2, 1, 0}};
    save_label_volume(td.str("l.bin"), lm);
    LabelMap back = load_label(td.str("l.bin"));
    CHECK(back == lm);
}

TEST_CASE("load_volume errors name what is wrong") {
    TempDir td;
    CHECK_THROWS_AS(load_volume(td.str("missing.bin")), std::runtime_error);

    // payload shorter than the header claims
    save_volume(td.str("short.bin"), {2, 2}, {1, 2, 3, 4}, VolumeDtype::f32);
    {
        std::ofstream f(td.str("short.bin"), std::ios::binary | std::ios::trunc);
        f << "xx";
    }
    try {
        load_volume(td.str("short.bin"));
        FAIL("expected a size mismatch error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }

    // header with an unknown dtype
    save_volume(td.str("bad.bin"), {2}, {1, 2}, VolumeDtype::f32);
    {
        std::ofstream f(td.str("bad.bin") + ".json", std::ios::trunc);
        f << R"({"version":1,"dtype":"f64","shape":[2]})";
    }
    CHECK_THROWS_AS(load_volume(td.str("bad.bin")), std::runtime_error);
}

TEST_CASE("synth_generate writes the advertised corpus layout") {
    TempDir td;
    DatasetSpec spec;
    spec.n_labeled = 2;
    spec.n_unlabeled = 3;
    spec.n_val = 2;
    spec.n_test = 2;
    spec.shape = {32, 32};
    spec.num_classes = 3;
    spec.seed = 7;
    DatasetManifest m = synth_generate(spec, td.str());

    CHECK(m.records.size() == 9);
    CHECK(m.by_split(Split::labeled).size() == 2);
    CHECK(m.by_split(Split::unlabeled).size() == 3);
    CHECK(m.by_split(Split::val).size() == 2);
    CHECK(m.by_split(Split::test).size() == 2);

    std::set<std::string> ids;
    for (const auto& r : m.records) {
        ids.insert(r.id);
        CHECK(fs::exists(fs::path(m.base_dir) / r.image));
        if (r.split == Split::unlabeled) {
            CHECK_FALSE(r.label.has_value());
        } else {
            REQUIRE(r.label.has_value());
            CHECK(fs::exists(fs::path(m.base_dir) / *r.label));
        }
        // gt exists for every sample, unlabeled included
        CHECK(fs::exists(gt_path(m, r.id)));
    }
    CHECK(ids.size() == 9);
    CHECK(fs::exists(td.path / "manifest.json"));

    // images have the requested shape and values in [0,1]
    Tensor img = load_image((fs::path(m.base_dir) / m.records[0].image).string());
    CHECK(img.shape() == spec.shape);
    for (double v : img.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // labels use exactly the classes 0..K-1
    LabelMap gt = load_label(gt_path(m, m.records[0].id));
    CHECK(gt.shape == spec.shape);
    for (auto c : gt.classes) CHECK(c < 3);
}

TEST_CASE("synth_generate is deterministic in the seed") {
    TempDir a, b, c;
    DatasetSpec spec;
    spec.n_labeled = 1;
    spec.n_unlabeled = 1;
    spec.n_val = 1;
    spec.n_test = 1;
    spec.shape = {16, 16};
    spec.seed = 42;
    DatasetManifest ma = synth_generate(spec, a.str());
    DatasetManifest mb = synth_generate(spec, b.str());
    spec.seed = 43;
    DatasetManifest mc = synth_generate(spec, c.str());

    for (std::size_t i = 0; i < ma.records.size(); ++i) {
        Tensor ia = load_image((fs::path(ma.base_dir) / ma.records[i].image).string());
        Tensor ib = load_image((fs::path(mb.base_dir) / mb.records[i].image).string());
        Tensor ic = load_image((fs::path(mc.base_dir) / mc.records[i].image).string());
        CHECK(ia.values() == ib.values());
        CHECK(ia.values() != ic.values());
    }
}

TEST_CASE("shift moves unlabeled intensities but leaves the labeled pool alone") {
    TempDir a, b;
    DatasetSpec spec;
    spec.n_labeled = 3;
    spec.n_unlabeled = 6;
    spec.n_val = 1;
    spec.n_test = 1;
    spec.shape = {32, 32};
    spec.seed = 5;
    spec.shift = 0.0;
    DatasetManifest m0 = synth_generate(spec, a.str());
    spec.shift = 0.5;
    DatasetManifest m1 = synth_generate(spec, b.str());

    auto pool_mean = [](const DatasetManifest& m, Split s) {
        double acc = 0;
        std::size_t n = 0;
        for (const auto& r : m.by_split(s)) {
            Tensor img = load_image((fs::path(m.base_dir) / r.image).string());
            for (double v : img.values()) acc += v;
            n += img.size();
        }
        return acc / n;
    };
    CHECK(pool_mean(m0, Split::labeled) ==
          doctest::Approx(pool_mean(m1, Split::labeled)).epsilon(1e-12));
    CHECK(pool_mean(m1, Split::unlabeled) > pool_mean(m0, Split::unlabeled) + 0.01);
}

TEST_CASE("manifest round trip preserves records and spec") {
    TempDir td;
    DatasetSpec spec;
    spec.n_labeled = 1;
    spec.n_unlabeled = 2;
    spec.n_val = 1;
    spec.n_test = 1;
    spec.shape = {16, 16};
    spec.shift = 0.25;
    spec.seed = 9;
    DatasetManifest m = synth_generate(spec, td.str());
    DatasetManifest back = load_manifest(td.str("manifest.json"));
    CHECK(back.records.size() == m.records.size());
    CHECK(back.spec.shift == m.spec.shift);
    CHECK(back.spec.shape == m.spec.shape);
    CHECK(back.spec.seed == m.spec.seed);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        CHECK(back.records[i].id == m.records[i].id);
        CHECK(back.records[i].split == m.records[i].split);
        CHECK(back.records[i].label.has_value() == m.records[i].label.has_value());
    }
}

TEST_CASE("dataset_spec_from_json_file applies defaults and rejects junk") {
    TempDir td;
    {
        std::ofstream f(td.str("spec.json"));
        f << R"({"n_labeled": 2, "shape": [48, 48], "shift": 0.3, "seed": 11})";
    }
    DatasetSpec s = dataset_spec_from_json_file(td.str("spec.json"));
    CHECK(s.n_labeled == 2);
    CHECK(s.n_unlabeled == 76);  // default survives
    CHECK(s.shape == std::vector<std::size_t>{48, 48});
    CHECK(s.shift == 0.3);
    CHECK(s.seed == 11);

    {
        std::ofstream f(td.str("bad.json"));
        f << "not json";
    }
    CHECK_THROWS(dataset_spec_from_json_file(td.str("bad.json")));
}

TEST_CASE("labeled samples contain K-1 foreground classes with separated blobs") {
    TempDir td;
    DatasetSpec spec;
    spec.n_labeled = 4;
    spec.n_unlabeled = 0;
    spec.n_val = 0;
    spec.n_test = 0;
    spec.shape = {64, 64};
    spec.num_classes = 3;
    spec.seed = 1;
    DatasetManifest m = synth_generate(spec, td.str());
    for (const auto& r : m.by_split(Split::labeled)) {
        LabelMap gt = load_label(gt_path(m, r.id));
        std::size_t c1 = 0, c2 = 0;
        for (auto c : gt.classes) {
            c1 += c == 1;
            c2 += c == 2;
        }
        CHECK(c1 > 0);
        CHECK(c2 > 0);
    }
}
