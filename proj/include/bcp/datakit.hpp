#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcp/volume.hpp"

namespace bcp {

enum class Split { labeled, unlabeled, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetSpec {
    int n_labeled = 4;
    int n_unlabeled = 76;
    int n_val = 8;
    int n_test = 16;
    std::vector<std::size_t> shape = {64, 64};
    int num_classes = 3;  // including background
    double shift = 0.0;   // labeled-vs-unlabeled distribution drift, [0,1]
    double noise_sigma = 0.08;
    std::uint64_t seed = 0;
};

struct VolumeRecord {
    std::string id;
    std::string image;                 // path relative to manifest dir
    std::optional<std::string> label;  // absent for the unlabeled pool
    Split split = Split::labeled;
};

struct DatasetManifest {
    int version = 1;
    DatasetSpec spec;
    std::vector<VolumeRecord> records;
    std::string base_dir;  // directory the relative paths resolve against

    std::vector<VolumeRecord> by_split(Split s) const;
};

// Volume file format: raw little-endian payload plus a sidecar JSON
// header at <path>.json with {"version", "dtype": "f32"|"u8", "shape"}.
enum class VolumeDtype { f32, u8 };

void save_volume(const std::string& path, const std::vector<std::size_t>& shape,
                 const std::vector<double>& values, VolumeDtype dtype);
void save_label_volume(const std::string& path, const LabelMap& label);

struct LoadedVolume {
    VolumeDtype dtype;
    std::vector<std::size_t> shape;
    std::vector<double> values;  // u8 payloads widened to double
};

LoadedVolume load_volume(const std::string& path);
Tensor load_image(const std::string& path);
LabelMap load_label(const std::string& path);

/// Generates the synthetic corpus: per sample K-1 non-overlapping blob
/// regions on a noisy background; unlabeled/val/test pools drift from the
/// labeled pool by `shift` in intensity and blob scale. Ground truth is
/// written for every sample under gt/ (diagnostics only); manifest
/// records carry label paths only for labeled/val/test.
DatasetManifest synth_generate(const DatasetSpec& spec, const std::string& out_dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

DatasetSpec dataset_spec_from_json_file(const std::string& path);

/// Ground-truth path for any record id (diagnostics bypass the manifest's
/// split typing on purpose).
std::string gt_path(const DatasetManifest& m, const std::string& id);

}  // namespace bcp
