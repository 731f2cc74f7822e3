#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bcp/datakit.hpp"
#include "bcp/evalkit.hpp"
#include "bcp/pseudolabel.hpp"
#include "bcp/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("file not found: " + path);
}

// ---- plot ------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + " is empty");
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (...) {
                row.push_back(std::nan(""));  // non-numeric cells (ids) plot as gaps
            }
        }
        if (row.size() != t.columns.size()) {
            throw std::runtime_error(path + ": ragged row with " +
                                     std::to_string(row.size()) + " cells");
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_svg_plot(const CsvTable& t, const std::string& path) {
    const double W = 720, H = 420, ml = 60, mr = 160, mt = 20, mb = 40;
    if (t.rows.empty() || t.columns.size() < 2) {
        throw std::runtime_error("metrics CSV needs at least 2 columns and 1 row");
    }
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& r : t.rows) {
        if (std::isnan(r[0])) continue;
        xmin = std::min(xmin, r[0]);
        xmax = std::max(xmax, r[0]);
        for (std::size_t c = 1; c < r.size(); ++c) {
            if (std::isnan(r[c])) continue;
            ymin = std::min(ymin, r[c]);
            ymax = std::max(ymax, r[c]);
        }
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                             "#ff7f0e", "#8c564b", "#17becf"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">" << t.columns[0] << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
            << "\" font-size=\"10\" text-anchor=\"end\">" << yv << "</text>\n";
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 14
            << "\" font-size=\"10\" text-anchor=\"middle\">" << xv << "</text>\n";
    }
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
        const char* color = palette[(c - 1) % 7];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (const auto& r : t.rows) {
            if (std::isnan(r[0]) || std::isnan(r[c])) continue;
            svg << px(r[0]) << "," << py(r[c]) << " ";
        }
        svg << "\"/>\n";
        const double ly = mt + 16 * static_cast<double>(c);
        svg << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << ly << "\" x2=\""
            << W - mr + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color << "\"/>\n"
            << "<text x=\"" << W - mr + 36 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\">" << t.columns[c] << "</text>\n";
    }
    svg << "</svg>\n";
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os << svg.str();
    }
    fs::rename(tmp, path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional copy-paste semi-supervised segmentation lab"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "Dataset spec JSON")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Supervised pretraining on labeled data");
    std::string pre_cfg, pre_data, pre_out;
    pre->add_option("--config", pre_cfg, "Train config JSON")->required();
    pre->add_option("--data", pre_data, "Dataset manifest JSON")->required();
    pre->add_option("--out", pre_out, "Output checkpoint path")->required();

    // train
    auto* tr = app.add_subcommand("train", "Self-training with the mean teacher");
    std::string tr_cfg, tr_data, tr_init, tr_out, tr_pretrain, tr_mixer, tr_mask;
    bool no_bcp = false, no_lcc = false;
    std::int64_t tr_seed = -1;
    tr->add_option("--config", tr_cfg, "Train config JSON")->required();
    tr->add_option("--data", tr_data, "Dataset manifest JSON")->required();
    tr->add_option("--init", tr_init, "Pretrained checkpoint (skips the pretrain phase)");
    tr->add_option("--out", tr_out, "Run directory")->required();
    tr->add_flag("--no-bcp", no_bcp, "Disable copy-paste mixing (mixer_mode=none)");
    tr->add_flag("--no-lcc", no_lcc, "Skip largest-connected-component filtering");
    tr->add_option("--pretrain", tr_pretrain, "Override pretrain mode: cp|plain|none");
    tr->add_option("--mixer", tr_mixer,
                   "Override mixer mode: bcp|in_only|out_only|within_set|mixup|fg_cutmix|none");
    tr->add_option("--mask", tr_mask,
                   "Override mask strategy: zero_centered|random_cubes|contact");
    tr->add_option("--seed", tr_seed, "Override training seed");

    // eval
    auto* ev = app.add_subcommand("eval", "Per-volume segmentation metrics");
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
    ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
    ev->add_option("--data", ev_data, "Dataset manifest JSON")->required();
    ev->add_option("--split", ev_split, "Split: labeled|unlabeled|val|test")
        ->capture_default_str();
    ev->add_option("--out", ev_out, "Output CSV path")->required();

    // diagnose
    auto* di = app.add_subcommand("diagnose", "Distribution-gap diagnostics");
    std::string di_ckpt, di_data, di_out;
    di->add_option("--checkpoint", di_ckpt, "Model checkpoint")->required();
    di->add_option("--data", di_data, "Dataset manifest JSON")->required();
    di->add_option("--out", di_out, "Output CSV path")->required();

    // predict
    auto* pr = app.add_subcommand("predict", "Segment a single volume");
    std::string pr_ckpt, pr_in, pr_out;
    pr->add_option("--checkpoint", pr_ckpt, "Model checkpoint")->required();
    pr->add_option("--input", pr_in, "Input image volume")->required();
    pr->add_option("--out", pr_out, "Output label volume")->required();

    // plot
    auto* pl = app.add_subcommand("plot", "Render a metrics CSV as an SVG line chart");
    std::string pl_csv, pl_out;
    pl->add_option("--metrics", pl_csv, "Metrics CSV")->required();
    pl->add_option("--out", pl_out, "Output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            require_file(gen_spec);
            bcp::DatasetSpec spec = bcp::dataset_spec_from_json_file(gen_spec);
            bcp::synth_generate(spec, gen_out);
        } else if (pre->parsed()) {
            require_file(pre_cfg);
            require_file(pre_data);
            bcp::TrainConfig cfg = bcp::train_config_from_json_file(pre_cfg);
            bcp::LoadedDataset data = bcp::load_dataset(bcp::load_manifest(pre_data));
            bcp::ModelParams params = bcp::pretrain(data, cfg);
            bcp::save_checkpoint(pre_out, params, cfg.net,
                                 static_cast<std::uint64_t>(cfg.pretrain_iters));
        } else if (tr->parsed()) {
            require_file(tr_cfg);
            require_file(tr_data);
            bcp::TrainConfig cfg = bcp::train_config_from_json_file(tr_cfg);
            if (no_bcp) cfg.mixer_mode = bcp::MixerMode::none;
            if (no_lcc) cfg.use_lcc = false;
            if (!tr_pretrain.empty()) {
                cfg.pretrain_mode = bcp::pretrain_mode_from_string(tr_pretrain);
            }
            if (!tr_mixer.empty()) cfg.mixer_mode = bcp::mixer_mode_from_string(tr_mixer);
            if (!tr_mask.empty()) {
                cfg.mask_spec.strategy = bcp::mask_strategy_from_string(tr_mask);
            }
            if (tr_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr_seed);
            bcp::LoadedDataset data = bcp::load_dataset(bcp::load_manifest(tr_data));
            if (!tr_init.empty()) {
                require_file(tr_init);
                bcp::Checkpoint ck = bcp::load_checkpoint(tr_init);
                bcp::train(data, cfg, tr_out, &ck.params);
            } else {
                bcp::train(data, cfg, tr_out);
            }
        } else if (ev->parsed()) {
            require_file(ev_ckpt);
            require_file(ev_data);
            bcp::Checkpoint ck = bcp::load_checkpoint(ev_ckpt);
            bcp::DatasetManifest m = bcp::load_manifest(ev_data);
            auto rows = bcp::evaluate_split(ck.params, ck.cfg, m,
                                            bcp::split_from_string(ev_split));
            bcp::write_metric_csv(rows, ev_out);
        } else if (di->parsed()) {
            require_file(di_ckpt);
            require_file(di_data);
            bcp::Checkpoint ck = bcp::load_checkpoint(di_ckpt);
            bcp::DatasetManifest m = bcp::load_manifest(di_data);
            bcp::write_diagnostic_csv(bcp::diagnose(ck.params, ck.cfg, m), di_out);
        } else if (pr->parsed()) {
            require_file(pr_ckpt);
            require_file(pr_in);
            bcp::Checkpoint ck = bcp::load_checkpoint(pr_ckpt);
            bcp::Tensor img = bcp::load_image(pr_in);
            bcp::LabelMap pred = bcp::predict(ck.params, ck.cfg, img);
            bcp::save_label_volume(pr_out, pred);
        } else if (pl->parsed()) {
            require_file(pl_csv);
            write_svg_plot(read_csv(pl_csv), pl_out);
        }
    } catch (const bcp::NumericError& e) {
        std::cerr << "error: numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
