#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bcp/datakit.hpp"
#include "bcp/segnet.hpp"
#include "bcp/volume.hpp"

namespace bcp {

struct MetricRow {
    std::string volume_id;
    int cls = 0;
    double dice = 0.0;
    double jaccard = 0.0;
    double hd95 = 0.0;  // NaN when undefined (empty surface)
    double asd = 0.0;
};

double dice(const LabelMap& a, const LabelMap& b, int cls);
double jaccard(const LabelMap& a, const LabelMap& b, int cls);

/// Voxels of class `cls` with at least one face-neighbor of a different
/// class; out-of-bounds sides count as background.
std::vector<std::size_t> surface_voxels(const LabelMap& a, int cls);

/// Symmetric 95th-percentile / mean surface distance in voxel units
/// (center-to-center Euclidean, optional anisotropic spacing). Throws
/// when either surface is empty.
double hd95(const LabelMap& a, const LabelMap& b, int cls,
            const std::vector<double>& spacing = {});
double asd(const LabelMap& a, const LabelMap& b, int cls,
           const std::vector<double>& spacing = {});

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// Gaussian KDE; bandwidth <= 0 selects Silverman's rule
/// 1.06 * sigma * n^(-1/5).
KdeCurve kde(const std::vector<double>& samples, const std::vector<double>& grid,
             double bandwidth = 0.0);

double silverman_bandwidth(const std::vector<double>& samples);

/// L1 distance between the KDEs of the two sample sets on a shared
/// 512-point grid spanning the pooled data +-4 bandwidths. Range [0,2].
double kde_gap(const std::vector<double>& feats_labeled,
               const std::vector<double>& feats_unlabeled);

struct DiceGap {
    double dice_labeled = 0.0;
    double dice_unlabeled = 0.0;
    double gap = 0.0;  // dice_labeled - dice_unlabeled
};

/// Mean foreground Dice of the model on each subset (ground truth comes
/// from the dataset's gt/ store), and their difference.
DiceGap dice_gap(const ModelParams& params, const NetConfig& cfg,
                 const DatasetManifest& manifest,
                 const std::vector<VolumeRecord>& labeled,
                 const std::vector<VolumeRecord>& unlabeled);

/// Per-volume metric rows for a split, fanned out over at most
/// BCP_LAB_THREADS workers; row order is stable.
std::vector<MetricRow> evaluate_split(const ModelParams& params, const NetConfig& cfg,
                                      const DatasetManifest& manifest, Split split);

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path);

struct DiagnosticRow {
    int cls = 0;
    double kde_gap = 0.0;
    double dice_labeled = 0.0;
    double dice_unlabeled = 0.0;
};

/// Per-class KDE gap between the labeled and unlabeled pools of the
/// model's true-class softmax confidence, plus its per-class
/// labeled/unlabeled Dice.
std::vector<DiagnosticRow> diagnose(const ModelParams& params, const NetConfig& cfg,
                                    const DatasetManifest& manifest);

void write_diagnostic_csv(const std::vector<DiagnosticRow>& rows, const std::string& path);

/// Worker cap: min(hardware_concurrency, $BCP_LAB_THREADS if set).
unsigned eval_threads();

}  // namespace bcp
