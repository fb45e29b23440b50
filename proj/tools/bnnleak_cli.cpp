/*
 * SPDX-FileCopyrightText: <text>Copyright 2026 The bnnleak authors</text>
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bnnleak/experiment_harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace bnnleak;

namespace {

struct CommonFlags {
    std::string config, out_dir, board, placement, filter, threshold, data_dir, dataset;
    uint64_t seed = 0;
    std::vector<int> runs;
    std::vector<size_t> images;
    bool no_denoise = false;
    int threads = -1;
};

void add_common(CLI::App *app, CommonFlags &f) {
    app->add_option("--config", f.config, "Experiment config file")->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--out-dir", f.out_dir, "Output directory");
    app->add_option("--board", f.board, "chipwhisperer | zcu104 | vcu118 | aws-f1");
    app->add_option("--placement", f.placement, "adjacent | cross-die | cross-slr");
    app->add_option("--runs", f.runs, "Run counts (ascending)")->delimiter(',');
    app->add_option("--filter", f.filter, "running-mean | butterworth")
        ->check(CLI::IsMember({"running-mean", "butterworth"}));
    app->add_option("--threshold", f.threshold, "auto | otsu | multi-otsu | <value>");
    app->add_flag("--no-denoise", f.no_denoise, "Skip ROF denoising");
    app->add_option("--data-dir", f.data_dir, "Directory holding the IDX files");
    app->add_option("--dataset", f.dataset, "mnist | fashion-mnist");
    app->add_option("--images", f.images, "Image indices (default: first per class)")
        ->delimiter(',');
    app->add_option("--threads", f.threads, "Worker threads (0: all cores)");
}

std::string default_data_dir() {
    if (std::filesystem::exists("data/t10k-images-idx3-ubyte"))
        return "data";
#ifdef BNNLEAK_DEFAULT_DATA_DIR
    return BNNLEAK_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
}

ExperimentSpec build_spec(const CLI::App *app, const CommonFlags &f,
                          const std::string &config_path = {}) {
    const std::string cfg = !config_path.empty() ? config_path : f.config;
    ExperimentSpec s = cfg.empty() ? ExperimentSpec{} : load_spec_file(cfg);
    if (cfg.empty())
        s.data_dir = default_data_dir();
    auto given = [&](const char *name) { return app->count(name) > 0; };
    if (given("--seed")) s.seed = f.seed;
    if (given("--out-dir")) s.out_dir = f.out_dir;
    if (given("--board")) s.board = f.board;
    if (given("--placement")) s.placement = f.placement;
    if (given("--runs")) s.run_counts = f.runs;
    if (given("--filter")) apply_filter_option(s.attack.filter, f.filter);
    if (given("--threshold")) apply_threshold_option(s.attack.threshold, f.threshold);
    if (given("--no-denoise")) s.attack.denoise = false;
    if (given("--data-dir")) s.data_dir = f.data_dir;
    if (given("--dataset")) s.dataset = f.dataset;
    if (given("--images")) s.image_ids = f.images;
    if (given("--threads")) s.threads = f.threads;
    s.validate();
    return s;
}

void print_rows(const std::vector<ReportRow> &rows) {
    std::printf("%s\n", report_csv_header().c_str());
    for (const auto &r : rows)
        std::printf("%s\n", to_csv(r).c_str());
}

void print_table(const std::vector<TableRow> &rows) {
    std::printf("%-16s %10s %10s\n", "row", "raw", "denoised");
    for (const auto &t : rows)
        std::printf("%-16s %10.4f %10.4f\n", t.label.c_str(), t.mean_raw, t.mean_denoised);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"bnnleak: power side-channel image recovery from a simulated BNN accelerator"};
    app.require_subcommand(1);

    CommonFlags sim_f, att_f, exp_f, sweep_f, place_f, rob_f;

    auto *sim = app.add_subcommand("simulate", "Simulate TDC traces for one image");
    add_common(sim, sim_f);
    size_t sim_image = 0;
    bool sim_image_given = false;
    sim->add_option("--image", sim_image, "Image index in the dataset")
        ->each([&](const std::string &) { sim_image_given = true; });

    auto *att = app.add_subcommand("attack", "Recover an image from a trace batch");
    add_common(att, att_f);
    std::string batch_path, reference;
    att->add_option("traces", batch_path, "TDC batch file")->required()->check(CLI::ExistingFile);
    att->add_option("--reference", reference, "Original image (PGM) to score against")
        ->check(CLI::ExistingFile);

    auto *met = app.add_subcommand("metrics", "Compare two PGM images");
    std::string pgm_a, pgm_b;
    int window = 11;
    met->add_option("original", pgm_a)->required()->check(CLI::ExistingFile);
    met->add_option("recovered", pgm_b)->required()->check(CLI::ExistingFile);
    met->add_option("--window", window, "MSSIM window");

    auto *exp = app.add_subcommand("experiment", "Run an experiment spec");
    add_common(exp, exp_f);
    std::string spec_path;
    exp->add_option("spec", spec_path, "Experiment config file")->check(CLI::ExistingFile);

    auto *sweep = app.add_subcommand("sweep-runs", "Quality versus run count");
    add_common(sweep, sweep_f);
    auto *place = app.add_subcommand("compare-placements", "Adjacent versus remote sensors");
    add_common(place, place_f);
    auto *rob = app.add_subcommand("robustness", "Background and bit-flip perturbations");
    add_common(rob, rob_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return 2;
    }

    try {
        if (*sim) {
            ExperimentSpec s = build_spec(sim, sim_f);
            if (sim_image_given)
                s.image_ids = {sim_image};
            const auto images = select_images(s);
            const SelectedImage &img = images.front();
            const SensorConfig sensor = resolve_sensor(s, s.placement);
            const BinaryKernel3x3 k = attack_kernel(s);
            const std::string hash = cell_config_hash(s, sensor, s.perturbation);
            const auto runs = capture_image_runs(img.image, k, s.activity, s.perturbation, sensor,
                                                 s.run_counts.back(), image_seed(s, img.id));
            namespace fs = std::filesystem;
            const fs::path dir = fs::path(s.out_dir) / hash / img.id;
            write_file_atomic((dir / "power.csv").string(),
                              power_trace_csv(simulate_first_kernel_trace(
                                                  perturb(img.image, s.perturbation), k, s.activity),
                                              hash));
            write_file_atomic((dir / "run0.csv").string(), tdc_trace_csv(runs.front()));
            write_file_atomic((dir / "traces.bin").string(), encode_tdc_batch(runs));
            write_pgm(img.image, (dir / "original.pgm").string());
            std::printf("%s\n", (dir / "traces.bin").string().c_str());
        } else if (*att) {
            ExperimentSpec s = build_spec(att, att_f);
            auto runs = decode_tdc_batch(read_file(batch_path));
            if (att->count("--runs")) {
                const size_t n = size_t(s.run_counts.back());
                if (n > runs.size())
                    throw Error(Errc::precondition, "batch holds fewer runs than requested");
                runs.resize(n);
            }
            const RecoveredImage rec = run_attack(runs, s.attack);
            namespace fs = std::filesystem;
            const fs::path dir(s.out_dir);
            write_file_atomic((dir / "avg.csv").string(), trace_csv(rec.averaged.values, "hw_mean"));
            write_file_atomic((dir / "filtered.csv").string(),
                              trace_csv(rec.filtered.values, "filtered"));
            write_file_atomic((dir / "hist.csv").string(), histogram_csv(rec.histogram));
            write_pgm(rec.binary, (dir / "binary.pgm").string());
            write_pgm(rec.denoised, (dir / "denoised.pgm").string());
            std::printf("runs=%d threshold=%.6f method=%s%s\n", rec.averaged.n_runs,
                        rec.threshold.value, method_name(rec.threshold.method),
                        rec.threshold.fallback ? " (fallback)" : "");
            if (!reference.empty()) {
                const Grid ref = read_pgm(reference);
                std::printf("ccr_norm_raw=%.6f ccr_norm_denoised=%.6f mssim_denoised=%.6f\n",
                            ccr_norm(ref, rec.binary), ccr_norm(ref, rec.denoised),
                            mssim(ref, rec.denoised));
            }
        } else if (*met) {
            const SimilarityReport r = compare(read_pgm(pgm_a), read_pgm(pgm_b), window);
            std::printf("ccr=%.6f\nccr_norm=%.6f\nmssim=%.6f\n", r.ccr, r.ccr_norm, r.mssim);
        } else if (*exp) {
            if (spec_path.empty() && exp_f.config.empty())
                throw Error(Errc::usage, "experiment needs a spec file");
            const ExperimentSpec s = build_spec(exp, exp_f, spec_path);
            const ExperimentResult r = run_experiment(s);
            print_rows(r.rows);
            if (s.write_artifacts && !r.rows.empty())
                std::fprintf(stderr, "wrote %s\n",
                             (std::filesystem::path(s.out_dir) / r.rows.front().config_hash)
                                 .string()
                                 .c_str());
        } else if (*sweep) {
            const SweepResult r = sweep_runs(build_spec(sweep, sweep_f));
            std::printf("n-runs,ccr_norm_raw,ccr_norm_denoised,mssim_raw,mssim_denoised\n");
            for (const auto &p : r.curve)
                std::printf("%d,%.6f,%.6f,%.6f,%.6f\n", p.n_runs, p.ccr_norm_raw,
                            p.ccr_norm_denoised, p.mssim_raw, p.mssim_denoised);
            std::printf("# spearman=%.4f\n", r.spearman_denoised);
        } else if (*place) {
            print_table(compare_placements(build_spec(place, place_f)));
        } else if (*rob) {
            const RobustnessResult r = robustness_study(build_spec(rob, rob_f));
            print_table(r.background);
            print_table(r.flip);
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::usage ? 2 : 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
