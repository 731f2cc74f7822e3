#include "bcp/datakit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace bcp {

std::string to_string(Split s) {
    switch (s) {
        case Split::labeled: return "labeled";
        case Split::unlabeled: return "unlabeled";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "labeled") return Split::labeled;
    if (s == "unlabeled") return Split::unlabeled;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + s);
}

std::vector<VolumeRecord> DatasetManifest::by_split(Split s) const {
    std::vector<VolumeRecord> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(r);
    }
    return out;
}

// ---- volume file format ----------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "volume writer assumes a little-endian host");

std::string dtype_str(VolumeDtype d) { return d == VolumeDtype::f32 ? "f32" : "u8"; }

VolumeDtype dtype_from_str(const std::string& s) {
    if (s == "f32") return VolumeDtype::f32;
    if (s == "u8") return VolumeDtype::u8;
    throw std::runtime_error("volume header: unknown dtype \"" + s + "\"");
}

void atomic_write(const std::string& path, const char* data, std::size_t len) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os.write(data, static_cast<std::streamsize>(len));
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

}  // namespace

void save_volume(const std::string& path, const std::vector<std::size_t>& shape,
                 const std::vector<double>& values, VolumeDtype dtype) {
    if (numel(shape) != values.size()) {
        throw std::invalid_argument("save_volume: shape " + shape_str(shape) +
                                    " does not match " + std::to_string(values.size()) +
                                    " values");
    }
    std::vector<char> payload;
    if (dtype == VolumeDtype::f32) {
        payload.resize(values.size() * 4);
        auto* p = reinterpret_cast<float*>(payload.data());
        for (std::size_t i = 0; i < values.size(); ++i) p[i] = static_cast<float>(values[i]);
    } else {
        payload.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < 0 || values[i] > 255 || values[i] != std::floor(values[i])) {
                throw std::invalid_argument("save_volume: value " + std::to_string(values[i]) +
                                            " not representable as u8");
            }
            payload[static_cast<std::size_t>(i)] = static_cast<char>(values[i]);
        }
    }
    atomic_write(path, payload.data(), payload.size());
    json header = {{"version", 1}, {"dtype", dtype_str(dtype)}, {"shape", shape}};
    const std::string htext = header.dump();
    atomic_write(path + ".json", htext.data(), htext.size());
}

void save_label_volume(const std::string& path, const LabelMap& label) {
    std::vector<double> v(label.classes.begin(), label.classes.end());
    save_volume(path, label.shape, v, VolumeDtype::u8);
}

LoadedVolume load_volume(const std::string& path) {
    std::ifstream hs(path + ".json");
    if (!hs) throw std::runtime_error("missing volume header " + path + ".json");
    json header;
    try {
        hs >> header;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed volume header " + path + ".json: " + e.what());
    }
    for (const char* field : {"version", "dtype", "shape"}) {
        if (!header.contains(field)) {
            throw std::runtime_error("volume header " + path + ".json missing field \"" +
                                     field + "\"");
        }
    }
    LoadedVolume out;
    out.dtype = dtype_from_str(header["dtype"].get<std::string>());
    out.shape = header["shape"].get<std::vector<std::size_t>>();
    const std::size_t n = numel(out.shape);
    const std::size_t elem = out.dtype == VolumeDtype::f32 ? 4 : 1;

    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw std::runtime_error("cannot open volume " + path);
    const auto actual = static_cast<std::size_t>(is.tellg());
    if (actual != n * elem) {
        throw std::runtime_error("volume " + path + ": payload is " +
                                 std::to_string(actual) + " bytes, expected " +
                                 std::to_string(n * elem) + " for shape " +
                                 shape_str(out.shape));
    }
    is.seekg(0);
    std::vector<char> raw(actual);
    is.read(raw.data(), static_cast<std::streamsize>(actual));
    out.values.resize(n);
    if (out.dtype == VolumeDtype::f32) {
        const auto* p = reinterpret_cast<const float*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) out.values[i] = static_cast<double>(p[i]);
    } else {
        const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) out.values[i] = static_cast<double>(p[i]);
    }
    return out;
}

Tensor load_image(const std::string& path) {
    LoadedVolume v = load_volume(path);
    return Tensor(v.shape, std::move(v.values));
}

LabelMap load_label(const std::string& path) {
    LoadedVolume v = load_volume(path);
    if (v.dtype != VolumeDtype::u8) {
        throw std::runtime_error("label volume " + path + " must have dtype u8");
    }
    LabelMap out{v.shape, std::vector<std::uint8_t>(v.values.size())};
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        out.classes[i] = static_cast<std::uint8_t>(v.values[i]);
    }
    return out;
}

// ---- synthetic generation --------------------------------------------------

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct Blob {
    double cy, cx, ry, rx;
};

struct SampleData {
    std::vector<double> image;
    LabelMap label;
};

// Class base intensities; shifted pools drift upward with `shift`.
double base_intensity(int cls, double shift, bool shifted) {
    double base = cls == 0 ? 0.15 : 0.45 + 0.28 * (cls - 1);
    if (shifted && cls > 0) base += 0.30 * shift;
    return base;
}

SampleData gen_sample(const DatasetSpec& spec, std::uint64_t seed, bool shifted) {
    const std::size_t H = spec.shape[0], W = spec.shape[1];
    const std::size_t n = H * W;
    const double scale = shifted ? 1.0 + 0.5 * spec.shift : 1.0;
    for (int attempt = 0;; ++attempt) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        LabelMap label{spec.shape, std::vector<std::uint8_t>(n, 0)};
        bool ok = true;
        std::vector<Blob> blobs;
        for (int cls = 1; cls < spec.num_classes && ok; ++cls) {
            bool placed = false;
            for (int tries = 0; tries < 40 && !placed; ++tries) {
                Blob b;
                b.ry = (4.0 + 6.0 * unit(rng)) * scale * static_cast<double>(H) / 64.0;
                b.rx = (4.0 + 6.0 * unit(rng)) * scale * static_cast<double>(W) / 64.0;
                b.cy = b.ry + 1 + unit(rng) * (static_cast<double>(H) - 2 * (b.ry + 1));
                b.cx = b.rx + 1 + unit(rng) * (static_cast<double>(W) - 2 * (b.rx + 1));
                bool overlap = false;
                for (const Blob& o : blobs) {
                    const double dy = (b.cy - o.cy), dx = (b.cx - o.cx);
                    const double rs = std::max(b.ry, b.rx) + std::max(o.ry, o.rx) + 2.0;
                    if (dy * dy + dx * dx < rs * rs) overlap = true;
                }
                if (overlap) continue;
                std::size_t count = 0;
                for (std::size_t y = 0; y < H; ++y) {
                    for (std::size_t x = 0; x < W; ++x) {
                        const double ny = (static_cast<double>(y) - b.cy) / b.ry;
                        const double nx = (static_cast<double>(x) - b.cx) / b.rx;
                        if (ny * ny + nx * nx <= 1.0) {
                            label.classes[y * W + x] = static_cast<std::uint8_t>(cls);
                            ++count;
                        }
                    }
                }
                if (count < n / 100) {  // class must cover >= 1%
                    for (auto& c : label.classes) {
                        if (c == cls) c = 0;
                    }
                    continue;
                }
                blobs.push_back(b);
                placed = true;
            }
            ok = placed;
        }
        if (ok) {
            std::size_t fg = 0;
            for (auto c : label.classes) fg += (c != 0);
            ok = fg * 100 <= n * 40;  // total foreground <= 40%
        }
        if (!ok) {
            std::cerr << "datakit: blob placement retry (seed " << seed << ", attempt "
                      << attempt << ")\n";
            continue;
        }
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        SampleData out;
        out.image.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::clamp(
                base_intensity(label.classes[i], spec.shift, shifted) + noise(rng), 0.0,
                1.0);
            // quantize to f32 so the on-disk round trip is exact
            out.image[i] = static_cast<double>(static_cast<float>(v));
        }
        out.label = std::move(label);
        return out;
    }
}

}  // namespace

DatasetManifest synth_generate(const DatasetSpec& spec, const std::string& out_dir) {
    if (spec.n_labeled < 1 || spec.n_unlabeled < 0 || spec.n_val < 0 ||
        spec.n_test < 0) {
        throw std::invalid_argument("dataset needs >= 1 labeled sample");
    }
    if (spec.shape.size() != 2 || spec.num_classes < 2) {
        throw std::invalid_argument("dataset spec requires a 2-D shape and K >= 2");
    }
    fs::create_directories(fs::path(out_dir) / "img");
    fs::create_directories(fs::path(out_dir) / "gt");
    DatasetManifest m;
    m.spec = spec;
    m.base_dir = out_dir;
    std::uint64_t index = 0;
    auto emit = [&](Split split, int count, bool shifted, const char* prefix) {
        for (int i = 0; i < count; ++i, ++index) {
            SampleData s = gen_sample(spec, mix_seed(spec.seed, index), shifted);
            const std::string id = prefix + std::to_string(i);
            const std::string img_rel = "img/" + id + ".bin";
            const std::string gt_rel = "gt/" + id + ".bin";
            save_volume((fs::path(out_dir) / img_rel).string(), spec.shape, s.image,
                        VolumeDtype::f32);
            save_label_volume((fs::path(out_dir) / gt_rel).string(), s.label);
            VolumeRecord rec;
            rec.id = id;
            rec.image = img_rel;
            rec.split = split;
            if (split != Split::unlabeled) rec.label = gt_rel;
            m.records.push_back(std::move(rec));
        }
    };
    emit(Split::labeled, spec.n_labeled, false, "l");
    emit(Split::unlabeled, spec.n_unlabeled, true, "u");
    emit(Split::val, spec.n_val, true, "v");
    emit(Split::test, spec.n_test, true, "t");
    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["version"] = m.version;
    j["spec"] = {{"n_labeled", m.spec.n_labeled},   {"n_unlabeled", m.spec.n_unlabeled},
                 {"n_val", m.spec.n_val},           {"n_test", m.spec.n_test},
                 {"shape", m.spec.shape},           {"num_classes", m.spec.num_classes},
                 {"shift", m.spec.shift},           {"noise_sigma", m.spec.noise_sigma},
                 {"seed", m.spec.seed}};
    j["records"] = json::array();
    for (const auto& r : m.records) {
        json rec = {{"id", r.id}, {"image", r.image}, {"split", to_string(r.split)}};
        if (r.label) rec["label"] = *r.label;
        j["records"].push_back(std::move(rec));
    }
    const std::string text = j.dump(2) + "\n";
    atomic_write(path, text.data(), text.size());
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    const auto& s = j.at("spec");
    m.spec.n_labeled = s.at("n_labeled").get<int>();
    m.spec.n_unlabeled = s.at("n_unlabeled").get<int>();
    m.spec.n_val = s.at("n_val").get<int>();
    m.spec.n_test = s.at("n_test").get<int>();
    m.spec.shape = s.at("shape").get<std::vector<std::size_t>>();
    m.spec.num_classes = s.at("num_classes").get<int>();
    m.spec.shift = s.at("shift").get<double>();
    m.spec.noise_sigma = s.at("noise_sigma").get<double>();
    m.spec.seed = s.at("seed").get<std::uint64_t>();
    for (const auto& rec : j.at("records")) {
        VolumeRecord r;
        r.id = rec.at("id").get<std::string>();
        r.image = rec.at("image").get<std::string>();
        r.split = split_from_string(rec.at("split").get<std::string>());
        if (rec.contains("label")) r.label = rec["label"].get<std::string>();
        m.records.push_back(std::move(r));
    }
    m.base_dir = fs::path(path).parent_path().string();
    return m;
}

DatasetSpec dataset_spec_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset spec " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed dataset spec " + path + ": " + e.what());
    }
    DatasetSpec s;
    auto get = [&](const char* key, auto& out) {
        if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    get("n_labeled", s.n_labeled);
    get("n_unlabeled", s.n_unlabeled);
    get("n_val", s.n_val);
    get("n_test", s.n_test);
    get("shape", s.shape);
    get("num_classes", s.num_classes);
    get("shift", s.shift);
    get("noise_sigma", s.noise_sigma);
    get("seed", s.seed);
    return s;
}

std::string gt_path(const DatasetManifest& m, const std::string& id) {
    return (fs::path(m.base_dir) / "gt" / (id + ".bin")).string();
}

}  // namespace bcp
