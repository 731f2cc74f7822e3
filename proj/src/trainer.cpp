#include "bcp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "bcp/evalkit.hpp"
#include "bcp/pseudolabel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bcp {

MixerMode mixer_mode_from_string(const std::string& s) {
    if (s == "bcp") return MixerMode::bcp;
    if (s == "in_only") return MixerMode::in_only;
    if (s == "out_only") return MixerMode::out_only;
    if (s == "within_set") return MixerMode::within_set;
    if (s == "mixup") return MixerMode::mixup;
    if (s == "fg_cutmix") return MixerMode::fg_cutmix;
    if (s == "none") return MixerMode::none;
    throw std::invalid_argument("unknown mixer mode: " + s);
}

PretrainMode pretrain_mode_from_string(const std::string& s) {
    if (s == "cp") return PretrainMode::cp;
    if (s == "plain") return PretrainMode::plain;
    if (s == "none") return PretrainMode::none;
    throw std::invalid_argument("unknown pretrain mode: " + s);
}

std::string to_string(MixerMode m) {
    switch (m) {
        case MixerMode::bcp: return "bcp";
        case MixerMode::in_only: return "in_only";
        case MixerMode::out_only: return "out_only";
        case MixerMode::within_set: return "within_set";
        case MixerMode::mixup: return "mixup";
        case MixerMode::fg_cutmix: return "fg_cutmix";
        case MixerMode::none: return "none";
    }
    return "?";
}

std::string to_string(PretrainMode m) {
    switch (m) {
        case PretrainMode::cp: return "cp";
        case PretrainMode::plain: return "plain";
        case PretrainMode::none: return "none";
    }
    return "?";
}

// ---- config I/O ------------------------------------------------------------

namespace {

json config_to_json(const TrainConfig& c) {
    return json{
        {"pretrain_iters", c.pretrain_iters},
        {"selftrain_iters", c.selftrain_iters},
        {"batch_labeled", c.batch_labeled},
        {"batch_unlabeled", c.batch_unlabeled},
        {"net",
         {{"in_channels", c.net.in_channels},
          {"num_classes", c.net.num_classes},
          {"base_width", c.net.base_width},
          {"depth", c.net.depth},
          {"seed", c.net.seed}}},
        {"mask",
         {{"strategy", to_string(c.mask_spec.strategy)},
          {"beta", c.mask_spec.beta},
          {"n_cubes", c.mask_spec.n_cubes},
          {"axis", c.mask_spec.axis},
          {"side", c.mask_spec.side},
          {"random_offset", c.mask_spec.random_offset}}},
        {"loss",
         {{"alpha", c.loss.alpha},
          {"dice_weight", c.loss.dice_weight},
          {"ce_weight", c.loss.ce_weight},
          {"dice_eps", c.loss.dice_eps}}},
        {"optim",
         {{"lr0", c.optim.lr0},
          {"decay_factor", c.optim.decay_factor},
          {"decay_interval", c.optim.decay_interval},
          {"momentum", c.optim.momentum}}},
        {"ema", {{"lambda", c.ema.lambda}}},
        {"mixer_mode", to_string(c.mixer_mode)},
        {"pretrain_mode", to_string(c.pretrain_mode)},
        {"use_lcc", c.use_lcc},
        {"seed", c.seed},
        {"checkpoint_every", c.checkpoint_every}};
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    TrainConfig c;
    read_if(j, "pretrain_iters", c.pretrain_iters);
    read_if(j, "selftrain_iters", c.selftrain_iters);
    read_if(j, "batch_labeled", c.batch_labeled);
    read_if(j, "batch_unlabeled", c.batch_unlabeled);
    if (j.contains("net")) {
        const auto& n = j["net"];
        read_if(n, "in_channels", c.net.in_channels);
        read_if(n, "num_classes", c.net.num_classes);
        read_if(n, "base_width", c.net.base_width);
        read_if(n, "depth", c.net.depth);
        read_if(n, "seed", c.net.seed);
    }
    if (j.contains("mask")) {
        const auto& m = j["mask"];
        if (m.contains("strategy")) {
            c.mask_spec.strategy = mask_strategy_from_string(m["strategy"].get<std::string>());
        }
        read_if(m, "beta", c.mask_spec.beta);
        read_if(m, "n_cubes", c.mask_spec.n_cubes);
        read_if(m, "axis", c.mask_spec.axis);
        read_if(m, "side", c.mask_spec.side);
        read_if(m, "random_offset", c.mask_spec.random_offset);
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        read_if(l, "alpha", c.loss.alpha);
        read_if(l, "dice_weight", c.loss.dice_weight);
        read_if(l, "ce_weight", c.loss.ce_weight);
        read_if(l, "dice_eps", c.loss.dice_eps);
    }
    if (j.contains("optim")) {
        const auto& o = j["optim"];
        read_if(o, "lr0", c.optim.lr0);
        read_if(o, "decay_factor", c.optim.decay_factor);
        read_if(o, "decay_interval", c.optim.decay_interval);
        read_if(o, "momentum", c.optim.momentum);
    }
    if (j.contains("ema")) read_if(j["ema"], "lambda", c.ema.lambda);
    if (j.contains("mixer_mode")) {
        c.mixer_mode = mixer_mode_from_string(j["mixer_mode"].get<std::string>());
    }
    if (j.contains("pretrain_mode")) {
        c.pretrain_mode = pretrain_mode_from_string(j["pretrain_mode"].get<std::string>());
    }
    read_if(j, "use_lcc", c.use_lcc);
    read_if(j, "seed", c.seed);
    read_if(j, "checkpoint_every", c.checkpoint_every);
    return c;
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << config_to_json(cfg).dump(2) << "\n";
}

// ---- dataset ---------------------------------------------------------------

LoadedDataset load_dataset(const DatasetManifest& manifest) {
    LoadedDataset d;
    d.manifest = manifest;
    auto image_of = [&](const VolumeRecord& r) {
        return load_image((fs::path(manifest.base_dir) / r.image).string());
    };
    auto sample_of = [&](const VolumeRecord& r) {
        if (!r.label) {
            throw std::runtime_error("record " + r.id + " in split " + to_string(r.split) +
                                     " has no label path");
        }
        return Sample{image_of(r),
                      load_label((fs::path(manifest.base_dir) / *r.label).string())};
    };
    for (const auto& r : manifest.records) {
        switch (r.split) {
            case Split::labeled: d.labeled.push_back(sample_of(r)); break;
            case Split::unlabeled: d.unlabeled.push_back(image_of(r)); break;
            case Split::val: d.val.push_back(sample_of(r)); break;
            case Split::test: d.test.push_back(sample_of(r)); break;
        }
    }
    return d;
}

// ---- training --------------------------------------------------------------

namespace {

Tensor stack_images(const std::vector<Tensor>& imgs) {
    const auto& s = imgs[0].shape();
    std::vector<double> v;
    v.reserve(imgs.size() * imgs[0].size());
    for (const auto& t : imgs) {
        check_same_spatial(t.shape(), s, "batch stack");
        v.insert(v.end(), t.values().begin(), t.values().end());
    }
    return Tensor({imgs.size(), 1, s[0], s[1]}, std::move(v));
}

struct SupervisedBatch {
    Tensor images;                 // [B,1,H,W]
    std::vector<LabelMap> targets;
    Tensor weights;                // [B,1,H,W] or [1,1,H,W]
};

// One gradient step over up to two supervised batches sharing a loss
// config; returns the loss values recorded for the report.
StepLoss grad_step(ModelParams& student, Velocity& velocity, const NetConfig& net,
                   const LossConfig& loss_cfg, double lr, double momentum,
                   const SupervisedBatch* in_batch, const SupervisedBatch* out_batch) {
    Tape tape;
    StepLoss sl;
    Tensor total;
    if (in_batch) {
        Tensor q = softmax_channels(forward(student, net, in_batch->images));
        Tensor l = seg_loss(q, in_batch->targets, in_batch->weights, loss_cfg);
        sl.l_in = l.item();
        total = l;
    }
    if (out_batch) {
        Tensor q = softmax_channels(forward(student, net, out_batch->images));
        Tensor l = seg_loss(q, out_batch->targets, out_batch->weights, loss_cfg);
        sl.l_out = l.item();
        total = total.defined() ? add(total, l) : l;
    }
    sl.l_all = total.item();
    if (!std::isfinite(sl.l_all)) throw NumericError("training loss is not finite");
    backward(total, tape);
    sgd_step(student, velocity, lr, momentum);
    return sl;
}

Tensor uniform_weights(const std::vector<std::size_t>& spatial, double value) {
    std::vector<std::size_t> shape{1, 1};
    shape.insert(shape.end(), spatial.begin(), spatial.end());
    return Tensor::full(shape, value);
}

std::vector<std::size_t> sample_distinct(std::mt19937_64& rng, std::size_t pool,
                                         std::size_t count) {
    if (count > pool) {
        throw std::invalid_argument("batch of " + std::to_string(count) +
                                    " exceeds pool of " + std::to_string(pool));
    }
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> dist(i, pool - 1);
        std::swap(idx[i], idx[dist(rng)]);
    }
    idx.resize(count);
    return idx;
}

double mean_val_dice(const ModelParams& params, const NetConfig& net,
                     const std::vector<Sample>& val) {
    if (val.empty()) return 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& s : val) {
        LabelMap pred = predict(params, net, s.image);
        for (int c = 1; c < net.num_classes; ++c) {
            acc += dice(pred, s.target, c);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

ModelParams pretrain(const LoadedDataset& data, const TrainConfig& cfg) {
    if (data.labeled.empty()) throw std::invalid_argument("pretrain: empty labeled set");
    ModelParams params = init_params(cfg.net).clone(true);
    if (cfg.pretrain_mode == PretrainMode::none) return params;
    if (cfg.pretrain_mode == PretrainMode::cp && data.labeled.size() < 2) {
        throw std::invalid_argument("cp pretraining needs at least 2 labeled samples");
    }
    std::mt19937_64 rng(cfg.seed ^ 0x5e740a11u);
    Velocity velocity;
    const auto spatial = data.labeled[0].image.shape();
    for (int k = 0; k < cfg.pretrain_iters; ++k) {
        const std::size_t bsz = std::min<std::size_t>(
            static_cast<std::size_t>(cfg.batch_labeled), data.labeled.size());
        auto idx = sample_distinct(rng, data.labeled.size(), bsz);
        std::vector<Tensor> imgs;
        std::vector<LabelMap> targets;
        if (cfg.pretrain_mode == PretrainMode::cp) {
            Mask mask = gen_mask(cfg.mask_spec, spatial, rng());
            for (std::size_t i = 0; i + 1 < idx.size(); i += 2) {
                Sample mixed =
                    within_set_mix(data.labeled[idx[i]], data.labeled[idx[i + 1]], mask);
                imgs.push_back(mixed.image);
                targets.push_back(mixed.target);
                // both orders so every sample contributes fore- and background
                Sample rev =
                    within_set_mix(data.labeled[idx[i + 1]], data.labeled[idx[i]], mask);
                imgs.push_back(rev.image);
                targets.push_back(rev.target);
            }
        } else {
            for (std::size_t i : idx) {
                imgs.push_back(data.labeled[i].image);
                targets.push_back(data.labeled[i].target);
            }
        }
        SupervisedBatch batch{stack_images(imgs), std::move(targets),
                              uniform_weights(spatial, 1.0)};
        grad_step(params, velocity, cfg.net, cfg.loss, lr_at(k, cfg.optim),
                  cfg.optim.momentum, &batch, nullptr);
    }
    return params;
}

StepLoss selftrain_step(TrainerState& state, const LoadedDataset& data,
                        const std::vector<std::size_t>& labeled_idx,
                        const std::vector<std::size_t>& unlabeled_idx,
                        const TrainConfig& cfg) {
    const auto spatial = data.labeled[0].image.shape();
    const LabelMode mode =
        cfg.net.num_classes == 2 ? LabelMode::binary : LabelMode::multiclass;
    auto pseudo = [&](std::size_t u) {
        return make_pseudo_labels(state.teacher, cfg.net, data.unlabeled[u], mode,
                                  cfg.use_lcc);
    };
    Mask mask = gen_mask(cfg.mask_spec, spatial, state.rng());
    const double lr = lr_at(state.iteration, cfg.optim);
    StepLoss sl;
    switch (cfg.mixer_mode) {
        case MixerMode::bcp:
        case MixerMode::in_only:
        case MixerMode::out_only: {
            const bool want_in = cfg.mixer_mode != MixerMode::out_only;
            const bool want_out = cfg.mixer_mode != MixerMode::in_only;
            const std::size_t n = std::min(labeled_idx.size(), unlabeled_idx.size());
            const std::size_t half = (want_in && want_out) ? n / 2 : n;
            if (half == 0) throw std::invalid_argument("selftrain_step: batch too small");
            std::vector<Tensor> in_imgs, out_imgs;
            std::vector<LabelMap> in_tgts, out_tgts;
            for (std::size_t k = 0; k < half; ++k) {
                if (want_in) {
                    const Sample& lj = data.labeled[labeled_idx[k]];
                    const std::size_t p = unlabeled_idx[k];
                    LabelMap yp = pseudo(p);
                    auto [x_in, x_out_unused] = bcp_mix_images(
                        lj.image, data.unlabeled[p], lj.image, data.unlabeled[p], mask);
                    auto [y_in, y_out_unused] = bcp_mix_labels(
                        lj.target, yp, lj.target, yp, mask, cfg.net.num_classes);
                    in_imgs.push_back(x_in);
                    in_tgts.push_back(y_in);
                }
                if (want_out) {
                    const std::size_t off = (want_in && want_out) ? half : 0;
                    const Sample& li = data.labeled[labeled_idx[k + off]];
                    const std::size_t q = unlabeled_idx[k + off];
                    LabelMap yq = pseudo(q);
                    auto [x_in_unused, x_out] = bcp_mix_images(
                        li.image, data.unlabeled[q], li.image, data.unlabeled[q], mask);
                    auto [y_in_unused, y_out] = bcp_mix_labels(
                        li.target, yq, li.target, yq, mask, cfg.net.num_classes);
                    out_imgs.push_back(x_out);
                    out_tgts.push_back(y_out);
                }
            }
            SupervisedBatch in_batch, out_batch;
            if (want_in) {
                in_batch = {stack_images(in_imgs), std::move(in_tgts),
                            provenance_weights(mask, cfg.loss.alpha, false)};
            }
            if (want_out) {
                out_batch = {stack_images(out_imgs), std::move(out_tgts),
                             provenance_weights(mask, cfg.loss.alpha, true)};
            }
            sl = grad_step(state.student, state.velocity, cfg.net, cfg.loss, lr,
                           cfg.optim.momentum, want_in ? &in_batch : nullptr,
                           want_out ? &out_batch : nullptr);
            break;
        }
        case MixerMode::within_set: {
            if (labeled_idx.size() < 2 || unlabeled_idx.size() < 2) {
                throw std::invalid_argument("within_set mixing needs pairs on both pools");
            }
            std::vector<Tensor> l_imgs, u_imgs;
            std::vector<LabelMap> l_tgts, u_tgts;
            for (std::size_t k = 0; k + 1 < labeled_idx.size(); k += 2) {
                Sample m = within_set_mix(data.labeled[labeled_idx[k]],
                                          data.labeled[labeled_idx[k + 1]], mask);
                l_imgs.push_back(m.image);
                l_tgts.push_back(m.target);
            }
            for (std::size_t k = 0; k + 1 < unlabeled_idx.size(); k += 2) {
                Sample a{data.unlabeled[unlabeled_idx[k]], pseudo(unlabeled_idx[k])};
                Sample b{data.unlabeled[unlabeled_idx[k + 1]], pseudo(unlabeled_idx[k + 1])};
                Sample m = within_set_mix(a, b, mask);
                u_imgs.push_back(m.image);
                u_tgts.push_back(m.target);
            }
            SupervisedBatch lb{stack_images(l_imgs), std::move(l_tgts),
                               uniform_weights(spatial, 1.0)};
            SupervisedBatch ub{stack_images(u_imgs), std::move(u_tgts),
                               uniform_weights(spatial, cfg.loss.alpha)};
            sl = grad_step(state.student, state.velocity, cfg.net, cfg.loss, lr,
                           cfg.optim.momentum, &lb, &ub);
            break;
        }
        case MixerMode::none: {
            std::vector<Tensor> l_imgs, u_imgs;
            std::vector<LabelMap> l_tgts, u_tgts;
            for (std::size_t i : labeled_idx) {
                l_imgs.push_back(data.labeled[i].image);
                l_tgts.push_back(data.labeled[i].target);
            }
            for (std::size_t u : unlabeled_idx) {
                u_imgs.push_back(data.unlabeled[u]);
                u_tgts.push_back(pseudo(u));
            }
            SupervisedBatch lb{stack_images(l_imgs), std::move(l_tgts),
                               uniform_weights(spatial, 1.0)};
            SupervisedBatch ub{stack_images(u_imgs), std::move(u_tgts),
                               uniform_weights(spatial, cfg.loss.alpha)};
            sl = grad_step(state.student, state.velocity, cfg.net, cfg.loss, lr,
                           cfg.optim.momentum, &lb, &ub);
            break;
        }
        case MixerMode::mixup: {
            const std::size_t n = std::min(labeled_idx.size(), unlabeled_idx.size());
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::vector<Tensor> imgs;
            std::vector<Tensor> softs;
            for (std::size_t k = 0; k < n; ++k) {
                const Sample& l = data.labeled[labeled_idx[k]];
                const std::size_t u = unlabeled_idx[k];
                const double gamma = unit(state.rng);  // Beta(1,1)
                SoftSample m = mixup_mix(l.image, data.unlabeled[u], l.target, pseudo(u),
                                         cfg.net.num_classes, gamma);
                imgs.push_back(m.image);
                std::vector<double> flat;
                for (const auto& cw : m.class_weights) {
                    flat.insert(flat.end(), cw.begin(), cw.end());
                }
                softs.push_back(
                    Tensor({1, static_cast<std::size_t>(cfg.net.num_classes), spatial[0],
                            spatial[1]},
                           std::move(flat)));
            }
            // soft targets have their own CE path; dice is skipped here
            Tape tape;
            Tensor total;
            for (std::size_t k = 0; k < n; ++k) {
                Tensor x({1, 1, spatial[0], spatial[1]}, imgs[k].values());
                Tensor q = softmax_channels(forward(state.student, cfg.net, x));
                Tensor l = soft_ce(q, softs[k], uniform_weights(spatial, 1.0));
                total = total.defined() ? add(total, l) : l;
            }
            total = div(total, Tensor::scalar(static_cast<double>(n)));
            sl.l_in = sl.l_all = total.item();
            if (!std::isfinite(sl.l_all)) throw NumericError("training loss is not finite");
            backward(total, tape);
            sgd_step(state.student, state.velocity, lr, cfg.optim.momentum);
            break;
        }
        case MixerMode::fg_cutmix: {
            std::vector<Sample> batch;
            for (std::size_t i : labeled_idx) batch.push_back(data.labeled[i]);
            const std::size_t n_labeled = batch.size();
            for (std::size_t u : unlabeled_idx) {
                batch.push_back({data.unlabeled[u], pseudo(u)});
            }
            CutmixResult res = fg_cutmix_mix(batch, 4, state.rng());
            std::vector<Tensor> imgs;
            std::vector<LabelMap> tgts;
            std::vector<double> wv;
            for (std::size_t b = 0; b < res.batch.size(); ++b) {
                imgs.push_back(res.batch[b].image);
                tgts.push_back(res.batch[b].target);
                for (std::size_t src : res.source[b]) {
                    wv.push_back(src < n_labeled ? 1.0 : cfg.loss.alpha);
                }
            }
            Tensor w({res.batch.size(), 1, spatial[0], spatial[1]}, std::move(wv));
            SupervisedBatch sb{stack_images(imgs), std::move(tgts), std::move(w)};
            sl = grad_step(state.student, state.velocity, cfg.net, cfg.loss, lr,
                           cfg.optim.momentum, &sb, nullptr);
            break;
        }
    }
    ema_update(state.teacher, state.student, cfg.ema);
    ++state.iteration;
    return sl;
}

TrainResult train(const LoadedDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir, const ModelParams* init) {
    if (cfg.mixer_mode == MixerMode::bcp &&
        (data.labeled.size() < 2 || data.unlabeled.size() < 2)) {
        throw std::invalid_argument("bcp training needs >= 2 labeled and >= 2 unlabeled");
    }
    const bool persist = !out_dir.empty();
    if (persist) {
        std::filesystem::create_directories(out_dir);
        save_train_config(cfg, (fs::path(out_dir) / "config.json").string());
    }
    TrainResult result;
    result.pretrained = init ? init->clone(false) : pretrain(data, cfg);

    TrainerState state;
    state.student = result.pretrained.clone(true);
    state.teacher = result.pretrained.clone(false);
    state.rng.seed(cfg.seed ^ 0x7ea9c0de);
    auto log_row = [&](const StepLoss& sl) {
        MetricLogRow row;
        row.iter = state.iteration;
        row.lr = lr_at(std::max(0, state.iteration - 1), cfg.optim);
        row.l_in = sl.l_in;
        row.l_out = sl.l_out;
        row.l_all = sl.l_all;
        row.val_dice = mean_val_dice(state.student, cfg.net, data.val);
        state.log.push_back(row);
    };
    StepLoss last{};
    for (int k = 0; k < cfg.selftrain_iters; ++k) {
        auto l_idx = sample_distinct(state.rng, data.labeled.size(),
                                     std::min<std::size_t>(data.labeled.size(),
                                                           static_cast<std::size_t>(
                                                               cfg.batch_labeled)));
        auto u_idx = sample_distinct(state.rng, data.unlabeled.size(),
                                     std::min<std::size_t>(data.unlabeled.size(),
                                                           static_cast<std::size_t>(
                                                               cfg.batch_unlabeled)));
        try {
            last = selftrain_step(state, data, l_idx, u_idx, cfg);
        } catch (const NumericError&) {
            if (persist) {
                save_checkpoint((fs::path(out_dir) / "nan_dump.bin").string(),
                                state.student, cfg.net,
                                static_cast<std::uint64_t>(state.iteration));
            }
            throw;
        }
        if (cfg.checkpoint_every > 0 && state.iteration % cfg.checkpoint_every == 0) {
            log_row(last);
            if (persist) {
                save_checkpoint(
                    (fs::path(out_dir) / ("checkpoint_" + std::to_string(state.iteration) +
                                          ".bin"))
                        .string(),
                    state.student, cfg.net, static_cast<std::uint64_t>(state.iteration));
            }
        }
    }
    if (cfg.selftrain_iters > 0 &&
        (cfg.checkpoint_every <= 0 || state.iteration % cfg.checkpoint_every != 0)) {
        log_row(last);
    }
    if (persist) {
        save_checkpoint((fs::path(out_dir) / "final.bin").string(), state.student, cfg.net,
                        static_cast<std::uint64_t>(state.iteration));
        save_checkpoint((fs::path(out_dir) / "teacher.bin").string(), state.teacher,
                        cfg.net, static_cast<std::uint64_t>(state.iteration));
        write_metrics_log(state.log, (fs::path(out_dir) / "metrics.csv").string());
    }
    result.student = std::move(state.student);
    result.teacher = std::move(state.teacher);
    result.log = std::move(state.log);
    return result;
}

LabelMap predict(const ModelParams& params, const NetConfig& cfg, const Tensor& x) {
    return make_pseudo_labels(params, cfg, x, LabelMode::multiclass, false);
}

void write_metrics_log(const std::vector<MetricLogRow>& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "iter,lr,l_in,l_out,l_all,val_dice\n";
    os.precision(10);
    for (const auto& r : log) {
        os << r.iter << "," << r.lr << "," << r.l_in << "," << r.l_out << "," << r.l_all
           << "," << r.val_dice << "\n";
    }
}

}  // namespace bcp
