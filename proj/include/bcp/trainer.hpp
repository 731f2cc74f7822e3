#pragma once

#include <random>
#include <string>
#include <vector>

#include "bcp/datakit.hpp"
#include "bcp/loss.hpp"
#include "bcp/mixer.hpp"
#include "bcp/segnet.hpp"

namespace bcp {

enum class MixerMode { bcp, in_only, out_only, within_set, mixup, fg_cutmix, none };
enum class PretrainMode { cp, plain, none };

MixerMode mixer_mode_from_string(const std::string& s);
PretrainMode pretrain_mode_from_string(const std::string& s);
std::string to_string(MixerMode m);
std::string to_string(PretrainMode m);

struct TrainConfig {
    int pretrain_iters = 200;
    int selftrain_iters = 400;
    int batch_labeled = 4;
    int batch_unlabeled = 4;
    NetConfig net;
    MaskSpec mask_spec;
    LossConfig loss;
    OptimConfig optim;
    EmaConfig ema;
    MixerMode mixer_mode = MixerMode::bcp;
    PretrainMode pretrain_mode = PretrainMode::cp;
    bool use_lcc = true;
    std::uint64_t seed = 0;
    int checkpoint_every = 100;
};

TrainConfig train_config_from_json_file(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

/// Dataset materialized in memory. Unlabeled samples deliberately carry
/// no targets; diagnostics fetch ground truth through datakit::gt_path.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Sample> labeled;
    std::vector<Tensor> unlabeled;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

struct MetricLogRow {
    int iter = 0;
    double lr = 0.0;
    double l_in = 0.0, l_out = 0.0, l_all = 0.0;
    double val_dice = 0.0;
};

struct TrainerState {
    ModelParams student;
    ModelParams teacher;
    Velocity velocity;
    int iteration = 0;
    std::mt19937_64 rng;
    std::vector<MetricLogRow> log;
};

/// Supervised warm-up on the labeled pool. cp mixes labeled pairs with a
/// fresh mask each step, plain trains unmixed, none returns the random
/// init untouched.
ModelParams pretrain(const LoadedDataset& data, const TrainConfig& cfg);

struct StepLoss {
    double l_in = 0.0, l_out = 0.0, l_all = 0.0;
};

/// One self-training iteration: teacher pseudo-labels, fresh mask, mix,
/// student forward + loss + SGD at lr_at(k), then EMA. labeled_idx and
/// unlabeled_idx must hold distinct indices each.
StepLoss selftrain_step(TrainerState& state, const LoadedDataset& data,
                        const std::vector<std::size_t>& labeled_idx,
                        const std::vector<std::size_t>& unlabeled_idx,
                        const TrainConfig& cfg);

struct TrainResult {
    ModelParams pretrained;
    ModelParams student;
    ModelParams teacher;
    std::vector<MetricLogRow> log;
};

/// Full pipeline: pretrain, copy into teacher, self-train. When out_dir
/// is nonempty, writes the config snapshot, periodic + final checkpoints
/// and metrics.csv there. A non-null `init` skips the pretrain phase and
/// self-trains from the given parameters instead.
TrainResult train(const LoadedDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir = "", const ModelParams* init = nullptr);

/// forward -> softmax -> argmax (lowest-index tie-break).
LabelMap predict(const ModelParams& params, const NetConfig& cfg, const Tensor& x);

void write_metrics_log(const std::vector<MetricLogRow>& log, const std::string& path);

}  // namespace bcp
