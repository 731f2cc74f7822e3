#include "bcp/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "bcp/pseudolabel.hpp"

namespace fs = std::filesystem;

namespace bcp {

namespace {

struct Overlap {
    std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap_counts(const LabelMap& a, const LabelMap& b, int cls) {
    check_same_spatial(a.shape, b.shape, "metric");
    Overlap o;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ina = a.classes[i] == cls, inb = b.classes[i] == cls;
        o.a += ina;
        o.b += inb;
        o.both += ina && inb;
    }
    return o;
}

}  // namespace

double dice(const LabelMap& a, const LabelMap& b, int cls) {
    Overlap o = overlap_counts(a, b, cls);
    if (o.a + o.b == 0) return 1.0;
    return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double jaccard(const LabelMap& a, const LabelMap& b, int cls) {
    Overlap o = overlap_counts(a, b, cls);
    const std::size_t uni = o.a + o.b - o.both;
    if (uni == 0) return 1.0;
    return static_cast<double>(o.both) / static_cast<double>(uni);
}

std::vector<std::size_t> surface_voxels(const LabelMap& a, int cls) {
    const auto& shape = a.shape;
    std::vector<std::size_t> stride(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        stride[static_cast<std::size_t>(i)] =
            stride[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    }
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < a.size(); ++v) {
        if (a.classes[v] != cls) continue;
        bool boundary = false;
        std::size_t rem = v;
        for (std::size_t d = 0; d < shape.size() && !boundary; ++d) {
            const std::size_t coord = rem / stride[d];
            rem %= stride[d];
            if (coord == 0 || a.classes[v - stride[d]] != cls) boundary = true;
            if (!boundary && (coord + 1 == shape[d] || a.classes[v + stride[d]] != cls)) {
                boundary = true;
            }
        }
        if (boundary) out.push_back(v);
    }
    return out;
}

namespace {

std::vector<std::vector<double>> voxel_coords(const std::vector<std::size_t>& voxels,
                                              const std::vector<std::size_t>& shape,
                                              const std::vector<double>& spacing) {
    std::vector<std::size_t> stride(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        stride[static_cast<std::size_t>(i)] =
            stride[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    }
    std::vector<double> sp = spacing.empty() ? std::vector<double>(shape.size(), 1.0)
                                             : spacing;
    if (sp.size() != shape.size()) {
        throw std::invalid_argument("spacing rank does not match volume rank");
    }
    std::vector<std::vector<double>> out(voxels.size(), std::vector<double>(shape.size()));
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        std::size_t rem = voxels[i];
        for (std::size_t d = 0; d < shape.size(); ++d) {
            out[i][d] = static_cast<double>(rem / stride[d]) * sp[d];
            rem %= stride[d];
        }
    }
    return out;
}

// Directed nearest-neighbor distances from each point of `from` to `to`.
std::vector<double> directed_distances(const std::vector<std::vector<double>>& from,
                                       const std::vector<std::vector<double>>& to) {
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) {
                const double d = from[i][k] - q[k];
                d2 += d * d;
            }
            best = std::min(best, d2);
        }
        out[i] = std::sqrt(best);
    }
    return out;
}

double percentile_linear(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

struct SurfacePair {
    std::vector<double> d_ab, d_ba;
};

SurfacePair surface_distances(const LabelMap& a, const LabelMap& b, int cls,
                              const std::vector<double>& spacing) {
    check_same_spatial(a.shape, b.shape, "surface distance");
    auto sa = surface_voxels(a, cls);
    auto sb = surface_voxels(b, cls);
    if (sa.empty() || sb.empty()) {
        throw std::domain_error("surface distance undefined: class " + std::to_string(cls) +
                                " has an empty surface on " +
                                (sa.empty() ? "the first" : "the second") + " volume");
    }
    auto ca = voxel_coords(sa, a.shape, spacing);
    auto cb = voxel_coords(sb, b.shape, spacing);
    return {directed_distances(ca, cb), directed_distances(cb, ca)};
}

}  // namespace

double hd95(const LabelMap& a, const LabelMap& b, int cls,
            const std::vector<double>& spacing) {
    SurfacePair sp = surface_distances(a, b, cls, spacing);
    return std::max(percentile_linear(sp.d_ab, 95.0), percentile_linear(sp.d_ba, 95.0));
}

double asd(const LabelMap& a, const LabelMap& b, int cls,
           const std::vector<double>& spacing) {
    SurfacePair sp = surface_distances(a, b, cls, spacing);
    double acc = std::accumulate(sp.d_ab.begin(), sp.d_ab.end(), 0.0) +
                 std::accumulate(sp.d_ba.begin(), sp.d_ba.end(), 0.0);
    return acc / static_cast<double>(sp.d_ab.size() + sp.d_ba.size());
}

double silverman_bandwidth(const std::vector<double>& samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("auto bandwidth needs at least 2 samples");
    }
    const double n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= (n - 1.0);
    return 1.06 * std::sqrt(var) * std::pow(n, -0.2);
}

KdeCurve kde(const std::vector<double>& samples, const std::vector<double>& grid,
             double bandwidth) {
    if (samples.empty()) throw std::invalid_argument("kde: empty sample set");
    double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
    if (h <= 0.0) h = 1e-12;  // degenerate (all samples equal)
    KdeCurve out;
    out.grid = grid;
    out.bandwidth = h;
    out.density.resize(grid.size());
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h *
                               std::sqrt(2.0 * 3.14159265358979323846));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double acc = 0.0;
        for (double s : samples) {
            const double z = (grid[i] - s) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out.density[i] = norm * acc;
    }
    return out;
}

double kde_gap(const std::vector<double>& feats_labeled,
               const std::vector<double>& feats_unlabeled) {
    if (feats_labeled.empty() || feats_unlabeled.empty()) {
        throw std::invalid_argument("kde_gap: empty feature set");
    }
    const double h1 = feats_labeled.size() > 1 ? silverman_bandwidth(feats_labeled) : 0.0;
    const double h2 =
        feats_unlabeled.size() > 1 ? silverman_bandwidth(feats_unlabeled) : 0.0;
    const double h = std::max({h1, h2, 1e-9});
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double s : feats_labeled) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (double s : feats_unlabeled) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    lo -= 4.0 * h;
    hi += 4.0 * h;
    const std::size_t points = 512;
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    KdeCurve c1 = kde(feats_labeled, grid, h);
    KdeCurve c2 = kde(feats_unlabeled, grid, h);
    double gap = 0.0;
    for (std::size_t i = 0; i + 1 < points; ++i) {
        const double f0 = std::abs(c1.density[i] - c2.density[i]);
        const double f1 = std::abs(c1.density[i + 1] - c2.density[i + 1]);
        gap += 0.5 * (f0 + f1) * (grid[i + 1] - grid[i]);
    }
    return gap;
}

unsigned eval_threads() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BCP_LAB_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

namespace {

LabelMap predict_record(const ModelParams& params, const NetConfig& cfg,
                        const DatasetManifest& m, const VolumeRecord& rec) {
    Tensor img = load_image((fs::path(m.base_dir) / rec.image).string());
    return make_pseudo_labels(params, cfg, img, LabelMode::multiclass, false);
}

double mean_fg_dice(const ModelParams& params, const NetConfig& cfg,
                    const DatasetManifest& m, const std::vector<VolumeRecord>& recs) {
    if (recs.empty()) throw std::invalid_argument("dice_gap: empty subset");
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& rec : recs) {
        LabelMap pred = predict_record(params, cfg, m, rec);
        LabelMap gt = load_label(gt_path(m, rec.id));
        for (int c = 1; c < cfg.num_classes; ++c) {
            acc += dice(pred, gt, c);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

DiceGap dice_gap(const ModelParams& params, const NetConfig& cfg,
                 const DatasetManifest& manifest,
                 const std::vector<VolumeRecord>& labeled,
                 const std::vector<VolumeRecord>& unlabeled) {
    DiceGap g;
    g.dice_labeled = mean_fg_dice(params, cfg, manifest, labeled);
    g.dice_unlabeled = mean_fg_dice(params, cfg, manifest, unlabeled);
    g.gap = g.dice_labeled - g.dice_unlabeled;
    return g;
}

std::vector<MetricRow> evaluate_split(const ModelParams& params, const NetConfig& cfg,
                                      const DatasetManifest& manifest, Split split) {
    const auto recs = manifest.by_split(split);
    std::vector<std::vector<MetricRow>> per_volume(recs.size());
    const unsigned workers = std::min<unsigned>(
        eval_threads(), static_cast<unsigned>(std::max<std::size_t>(recs.size(), 1)));
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t i = next.fetch_add(1); i < recs.size(); i = next.fetch_add(1)) {
            LabelMap pred = predict_record(params, cfg, manifest, recs[i]);
            LabelMap gt = load_label(gt_path(manifest, recs[i].id));
            for (int c = 1; c < cfg.num_classes; ++c) {
                MetricRow row;
                row.volume_id = recs[i].id;
                row.cls = c;
                row.dice = dice(pred, gt, c);
                row.jaccard = jaccard(pred, gt, c);
                try {
                    row.hd95 = hd95(pred, gt, c);
                    row.asd = asd(pred, gt, c);
                } catch (const std::domain_error&) {
                    row.hd95 = std::nan("");
                    row.asd = std::nan("");
                }
                per_volume[i].push_back(std::move(row));
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    std::vector<MetricRow> rows;
    for (auto& v : per_volume) {
        for (auto& r : v) rows.push_back(std::move(r));
    }
    return rows;
}

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "volume_id,class,dice,jaccard,hd95,asd\n";
    os.precision(10);
    for (const auto& r : rows) {
        os << r.volume_id << "," << r.cls << "," << r.dice << "," << r.jaccard << ","
           << r.hd95 << "," << r.asd << "\n";
    }
}

std::vector<DiagnosticRow> diagnose(const ModelParams& params, const NetConfig& cfg,
                                    const DatasetManifest& manifest) {
    const auto labeled = manifest.by_split(Split::labeled);
    const auto unlabeled = manifest.by_split(Split::unlabeled);
    if (labeled.empty() || unlabeled.empty()) {
        throw std::invalid_argument("diagnose needs nonempty labeled and unlabeled pools");
    }
    // feature per voxel: the model's softmax probability of the voxel's
    // true class. A model that treats both pools alike produces matching
    // confidence distributions; one fit only to the labeled pool does not.
    auto collect = [&](const std::vector<VolumeRecord>& recs, int cls) {
        std::vector<double> feats;
        for (const auto& rec : recs) {
            Tensor img = load_image((fs::path(manifest.base_dir) / rec.image).string());
            Tensor x({1, 1, img.shape()[0], img.shape()[1]}, img.values());
            Tensor q = softmax_channels(forward(params, cfg, x));
            LabelMap gt = load_label(gt_path(manifest, rec.id));
            const std::size_t spatial = gt.size();
            for (std::size_t i = 0; i < spatial; ++i) {
                if (gt.classes[i] == cls) {
                    feats.push_back(q.values()[static_cast<std::size_t>(cls) * spatial + i]);
                }
            }
        }
        return feats;
    };
    auto per_class_dice = [&](const std::vector<VolumeRecord>& recs, int cls) {
        double acc = 0.0;
        for (const auto& rec : recs) {
            LabelMap pred = predict_record(params, cfg, manifest, rec);
            LabelMap gt = load_label(gt_path(manifest, rec.id));
            acc += dice(pred, gt, cls);
        }
        return acc / static_cast<double>(recs.size());
    };
    std::vector<DiagnosticRow> rows;
    for (int c = 1; c < cfg.num_classes; ++c) {
        DiagnosticRow row;
        row.cls = c;
        const auto fl = collect(labeled, c);
        const auto fu = collect(unlabeled, c);
        // a class the model never predicts in one pool is maximally
        // misaligned; report the disjoint-support limit
        row.kde_gap = (fl.empty() || fu.empty()) ? 2.0 : kde_gap(fl, fu);
        row.dice_labeled = per_class_dice(labeled, c);
        row.dice_unlabeled = per_class_dice(unlabeled, c);
        rows.push_back(row);
    }
    return rows;
}

void write_diagnostic_csv(const std::vector<DiagnosticRow>& rows,
                          const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "class,kde_gap,dice_labeled,dice_unlabeled\n";
    os.precision(10);
    for (const auto& r : rows) {
        os << r.cls << "," << r.kde_gap << "," << r.dice_labeled << ","
           << r.dice_unlabeled << "\n";
    }
}

}  // namespace bcp
