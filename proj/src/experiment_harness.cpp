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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace bnnleak {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_metric(double v) {
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

template <class T> std::string join(const std::vector<T> &v) {
    std::ostringstream o;
    for (size_t i = 0; i < v.size(); ++i)
        o << (i ? "," : "") << v[i];
    return o.str();
}

void run_parallel(size_t jobs, int threads, const std::function<void(size_t)> &fn) {
    size_t n = threads > 0 ? size_t(threads) : std::max(1u, std::thread::hardware_concurrency());
    n = std::min(n, jobs);
    if (n <= 1) {
        for (size_t j = 0; j < jobs; ++j)
            fn(j);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::jthread> pool;
    for (size_t t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (size_t j; (j = next++) < jobs;) {
                try {
                    fn(j);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

std::string perturbation_canonical(const PixelPerturbation &p) {
    switch (p.kind) {
    case PixelPerturbation::Kind::none: return "none";
    case PixelPerturbation::Kind::constant_background:
        return "background=" + std::to_string(p.background);
    case PixelPerturbation::Kind::lsb_flip:
        return "flip=" + fmt(p.probability) + "/" + std::to_string(p.bits);
    }
    return "?";
}

std::string attack_canonical(const AttackParams &a) {
    std::ostringstream o;
    o << "filter=" << (a.filter.kind == FilterKind::running_mean ? "running-mean" : "butterworth")
      << "," << a.filter.window << "," << fmt(a.filter.cutoff) << ";threshold=" << int(a.threshold.mode)
      << "," << fmt(a.threshold.manual_value) << "," << fmt(a.threshold.near_empty_fraction) << ","
      << a.threshold.min_run << ";bins=" << a.bins << ";denoise=" << a.denoise << ","
      << fmt(a.rof.tau) << "," << fmt(a.rof.tv_weight) << "," << a.rof.max_iter << ","
      << fmt(a.rof.tol);
    return o.str();
}

} // namespace

AttackParams default_attack() {
    AttackParams a;
    a.threshold.mode = ThresholdParams::Mode::multi_otsu;
    return a;
}

void ExperimentSpec::validate() const {
    if (run_counts.empty())
        throw Error(Errc::precondition, "run counts must not be empty");
    for (size_t i = 0; i < run_counts.size(); ++i)
        if (run_counts[i] < 1 || (i && run_counts[i] <= run_counts[i - 1]))
            throw Error(Errc::precondition, "run counts must be positive and strictly increasing");
    if (dataset != "mnist" && dataset != "fashion-mnist")
        throw Error(Errc::usage, "dataset must be mnist or fashion-mnist");
    if (kernel_index < 0 || kernel_index >= 64)
        throw Error(Errc::precondition, "kernel index outside [0, 64)");
    if (stressor_gain < 1.0)
        throw Error(Errc::precondition, "stressor gain must be >= 1");
    perturbation.validate();
    activity.validate();
    board_preset(board);
    placement_attenuation(placement);
}

SensorConfig resolve_sensor(const ExperimentSpec &spec, const std::string &placement) {
    SensorConfig c = board_preset(spec.board);
    c.attenuation = placement_attenuation(placement);
    if (spec.stressors)
        c.stressor_gain = spec.stressor_gain;
    const SensorOverrides &o = spec.sensor;
    if (o.noise_sigma) c.noise_sigma = *o.noise_sigma;
    if (o.r_pdn) c.r_pdn = *o.r_pdn;
    if (o.k_per_volt) c.k_per_volt = *o.k_per_volt;
    if (o.stage_delay_ps) c.stage_delay_ps = *o.stage_delay_ps;
    if (o.clock_mhz) c.clock_mhz = *o.clock_mhz;
    if (o.attenuation) c.attenuation = *o.attenuation;
    if (o.nominal_drop_v) c.nominal_drop_v = *o.nominal_drop_v;
    if (o.max_initial_delay_ps) c.max_initial_delay_ps = *o.max_initial_delay_ps;
    if (o.misalignment) c.misalignment = *o.misalignment;
    if (o.calibration_target) c.calibration_target = *o.calibration_target;
    if (o.stages) c.stages = *o.stages;
    if (o.envelope) c.envelope = *o.envelope;
    if (o.envelope_kind) c.envelope.kind = *o.envelope_kind;
    if (o.envelope_amplitude_v) c.envelope.amplitude_v = *o.envelope_amplitude_v;
    if (o.envelope_cycles) c.envelope.cycles = *o.envelope_cycles;
    c.validate();
    return c;
}

// ---------------------------------------------------------------- config file

namespace {

using boost::property_tree::ptree;

template <class T> T parse_scalar(const std::string &key, const std::string &v) {
    std::istringstream in(v);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof())
        throw Error(Errc::parse_failure, "bad value '" + v + "' for " + key);
    return out;
}

bool parse_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw Error(Errc::parse_failure, "bad boolean '" + v + "' for " + key);
}

std::vector<std::string> split_list(const std::string &v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

template <class T> std::vector<T> parse_list(const std::string &key, const std::string &v) {
    std::vector<T> out;
    for (const std::string &s : split_list(v))
        out.push_back(parse_scalar<T>(key, s));
    return out;
}

Envelope::Kind envelope_kind(const std::string &v) {
    if (v == "none") return Envelope::Kind::none;
    if (v == "exponential") return Envelope::Kind::exponential;
    if (v == "sinusoidal") return Envelope::Kind::sinusoidal;
    throw Error(Errc::parse_failure, "unknown envelope '" + v + "'");
}

} // namespace

void apply_threshold_option(ThresholdParams &t, const std::string &v) {
    if (v == "auto") {
        t.mode = ThresholdParams::Mode::automatic;
    } else if (v == "otsu") {
        t.mode = ThresholdParams::Mode::otsu;
    } else if (v == "multi-otsu") {
        t.mode = ThresholdParams::Mode::multi_otsu;
    } else {
        t.mode = ThresholdParams::Mode::manual;
        t.manual_value = parse_scalar<double>("threshold", v);
    }
}

void apply_filter_option(FilterParams &f, const std::string &v) {
    if (v == "running-mean")
        f.kind = FilterKind::running_mean;
    else if (v == "butterworth")
        f.kind = FilterKind::butterworth;
    else
        throw Error(Errc::parse_failure, "unknown filter '" + v + "'");
}

ExperimentSpec parse_spec(const std::string &text) {
    ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error &e) {
        throw Error(Errc::parse_failure, e.what());
    }
    ExperimentSpec s;
    std::string pert_kind = "none";
    for (const auto &[section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw Error(Errc::parse_failure, "key '" + section + "' outside a section");
        for (const auto &[key, node] : body) {
            const std::string v = node.data();
            const std::string k = section + "." + key;
            auto d = [&] { return parse_scalar<double>(k, v); };
            auto i = [&] { return parse_scalar<int>(k, v); };
            if (k == "experiment.name") s.name = v;
            else if (k == "experiment.board") s.board = v;
            else if (k == "experiment.placement") s.placement = v;
            else if (k == "experiment.runs") s.run_counts = parse_list<int>(k, v);
            else if (k == "experiment.seed") s.seed = parse_scalar<uint64_t>(k, v);
            else if (k == "experiment.dataset") s.dataset = v;
            else if (k == "experiment.data_dir") s.data_dir = v;
            else if (k == "experiment.images") {
                if (v == "first-per-class") s.image_ids.clear();
                else s.image_ids = parse_list<size_t>(k, v);
            }
            else if (k == "experiment.out_dir") s.out_dir = v;
            else if (k == "experiment.write_artifacts") s.write_artifacts = parse_bool(k, v);
            else if (k == "experiment.threads") s.threads = i();
            else if (k == "model.seed") s.model_seed = parse_scalar<uint64_t>(k, v);
            else if (k == "model.path") s.model_path = v;
            else if (k == "model.kernel") s.kernel_index = i();
            else if (k == "perturbation.kind") pert_kind = v;
            else if (k == "perturbation.value") s.perturbation.background = i();
            else if (k == "perturbation.probability") s.perturbation.probability = d();
            else if (k == "perturbation.bits") s.perturbation.bits = i();
            else if (k == "stressor.enabled") s.stressors = parse_bool(k, v);
            else if (k == "stressor.gain") s.stressor_gain = d();
            else if (k == "activity.alpha") s.activity.alpha = d();
            else if (k == "activity.width") s.activity.width = i();
            else if (k == "activity.toggle_weight") s.activity.toggle_weight = d();
            else if (k == "activity.lane_gain") s.activity.lane_gain = d();
            else if (k == "activity.lane_gamma") s.activity.lane_gamma = d();
            else if (k == "activity.other_kernels_power") s.activity.other_kernels_power = d();
            else if (k == "sensor.noise_sigma") s.sensor.noise_sigma = d();
            else if (k == "sensor.r_pdn") s.sensor.r_pdn = d();
            else if (k == "sensor.k_per_volt") s.sensor.k_per_volt = d();
            else if (k == "sensor.stage_delay_ps") s.sensor.stage_delay_ps = d();
            else if (k == "sensor.clock_mhz") s.sensor.clock_mhz = d();
            else if (k == "sensor.attenuation") s.sensor.attenuation = d();
            else if (k == "sensor.nominal_drop_v") s.sensor.nominal_drop_v = d();
            else if (k == "sensor.max_initial_delay_ps") s.sensor.max_initial_delay_ps = d();
            else if (k == "sensor.misalignment") s.sensor.misalignment = i();
            else if (k == "sensor.calibration_target") s.sensor.calibration_target = i();
            else if (k == "sensor.stages") s.sensor.stages = i();
            else if (k == "sensor.envelope") s.sensor.envelope_kind = envelope_kind(v);
            else if (k == "sensor.envelope_amplitude_v") s.sensor.envelope_amplitude_v = d();
            else if (k == "sensor.envelope_cycles") s.sensor.envelope_cycles = d();
            else if (k == "attack.filter") apply_filter_option(s.attack.filter, v);
            else if (k == "attack.window") s.attack.filter.window = i();
            else if (k == "attack.cutoff") s.attack.filter.cutoff = d();
            else if (k == "attack.threshold") apply_threshold_option(s.attack.threshold, v);
            else if (k == "attack.near_empty_fraction") s.attack.threshold.near_empty_fraction = d();
            else if (k == "attack.bins") s.attack.bins = i();
            else if (k == "attack.denoise") s.attack.denoise = parse_bool(k, v);
            else if (k == "attack.rof_tau") s.attack.rof.tau = d();
            else if (k == "attack.rof_tv_weight") s.attack.rof.tv_weight = d();
            else if (k == "attack.rof_max_iter") s.attack.rof.max_iter = i();
            else if (k == "attack.rof_tol") s.attack.rof.tol = d();
            else if (k == "study.placements") s.placements = split_list(v);
            else if (k == "study.backgrounds") s.backgrounds = parse_list<int>(k, v);
            else if (k == "study.flip_probabilities") s.flip_probabilities = parse_list<double>(k, v);
            else if (k == "study.flip_bits") s.flip_bits = parse_list<int>(k, v);
            else throw Error(Errc::parse_failure, "unknown key '" + k + "'");
        }
    }
    if (pert_kind == "none") s.perturbation.kind = PixelPerturbation::Kind::none;
    else if (pert_kind == "background") s.perturbation.kind = PixelPerturbation::Kind::constant_background;
    else if (pert_kind == "flip") s.perturbation.kind = PixelPerturbation::Kind::lsb_flip;
    else throw Error(Errc::parse_failure, "unknown perturbation '" + pert_kind + "'");
    s.validate();
    return s;
}

ExperimentSpec load_spec_file(const std::string &path) {
    ExperimentSpec s = parse_spec(read_file(path));
    // Relative data paths are resolved against the config file's directory.
    namespace fs = std::filesystem;
    const fs::path base = fs::path(path).parent_path();
    if (fs::path(s.data_dir).is_relative() && !fs::exists(s.data_dir) &&
        fs::exists(base / s.data_dir))
        s.data_dir = (base / s.data_dir).string();
    return s;
}

// ---------------------------------------------------------------- report rows

std::string report_csv_header() {
    return "image-id,n-runs,config-hash,ccr,ccr_norm_raw,ccr_norm_denoised,mssim_raw,"
           "mssim_denoised";
}

std::string to_csv(const ReportRow &r) {
    std::ostringstream o;
    o << r.image_id << ',' << r.n_runs << ',' << r.config_hash << ',' << fmt_metric(r.ccr) << ','
      << fmt_metric(r.ccr_norm_raw) << ',' << fmt_metric(r.ccr_norm_denoised) << ','
      << fmt_metric(r.mssim_raw) << ',' << fmt_metric(r.mssim_denoised);
    return o.str();
}

ReportRow parse_report_row(const std::string &line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ','))
        f.push_back(item);
    if (f.size() != 8)
        throw Error(Errc::parse_failure, "report row needs 8 fields: " + line);
    auto num = [](const std::string &s) {
        return s == "nan" ? std::numeric_limits<double>::quiet_NaN()
                          : parse_scalar<double>("report", s);
    };
    ReportRow r;
    r.image_id = f[0];
    r.n_runs = parse_scalar<int>("n-runs", f[1]);
    r.config_hash = f[2];
    r.ccr = num(f[3]);
    r.ccr_norm_raw = num(f[4]);
    r.ccr_norm_denoised = num(f[5]);
    r.mssim_raw = num(f[6]);
    r.mssim_denoised = num(f[7]);
    return r;
}

// ---------------------------------------------------------------- simulation

std::vector<SelectedImage> select_images(const ExperimentSpec &spec) {
    namespace fs = std::filesystem;
    const fs::path dir(spec.data_dir);
    const bool fashion = spec.dataset == "fashion-mnist";
    const std::string img_path =
        (dir / (fashion ? "fashion-subset-images-idx3-ubyte" : "t10k-images-idx3-ubyte")).string();
    const std::string lab_path =
        (dir / (fashion ? "fashion-subset-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte")).string();
    if (!fs::exists(img_path) || !fs::exists(lab_path))
        throw Error(Errc::missing_dataset, "dataset files not found under " + spec.data_dir);
    const size_t n = idx_item_count(img_path);
    const std::vector<int> labels = load_idx_labels(lab_path, n);
    std::vector<size_t> ids = spec.image_ids.empty() ? first_index_per_class(labels) : spec.image_ids;
    const size_t need = *std::max_element(ids.begin(), ids.end()) + 1;
    if (need > n)
        throw Error(Errc::precondition, "image id beyond the dataset");
    const std::vector<Image> all = load_idx_images(img_path, need);
    std::vector<SelectedImage> out;
    for (size_t id : ids) {
        char name[48];
        std::snprintf(name, sizeof name, "%s-%05zu", fashion ? "fashion" : "mnist", id);
        SelectedImage s{id, name, all[id]};
        s.image.label = labels[id];
        out.push_back(s);
    }
    return out;
}

BinaryKernel3x3 attack_kernel(const ExperimentSpec &spec) {
    const BnnModel m =
        spec.model_path.empty() ? generate_random_model(spec.model_seed) : load_model(spec.model_path);
    return m.first_kernel(spec.kernel_index);
}

std::vector<TdcTrace> capture_image_runs(const Image &image, const BinaryKernel3x3 &kernel,
                                         const ActivityModelConfig &activity,
                                         const PixelPerturbation &perturbation,
                                         const SensorConfig &sensor, int n_runs,
                                         uint64_t seed) {
    if (perturbation.kind != PixelPerturbation::Kind::lsb_flip) {
        const Image shown = perturb(image, perturbation);
        return capture_runs(simulate_first_kernel_trace(shown, kernel, activity), sensor, n_runs,
                            seed);
    }
    if (n_runs < 1)
        throw Error(Errc::precondition, "run count must be positive");
    // Every run sees a freshly perturbed copy of the image.
    const double init = calibrate(sensor, sensor.nominal_drop_v);
    const std::string hash = hex64(fnv1a64(sensor.canonical()));
    std::vector<TdcTrace> runs;
    runs.reserve(n_runs);
    for (int r = 0; r < n_runs; ++r) {
        Rng prng = Rng::derive(seed, uint64_t(r), 1);
        const Image shown = perturb(image, perturbation, prng);
        const PowerTrace p =
            apply_misalignment(simulate_first_kernel_trace(shown, kernel, activity), sensor.misalignment);
        Rng nrng = Rng::derive(seed, uint64_t(r));
        runs.push_back(sample_tdc(voltage_drop(p, sensor), sensor, init, nrng));
        runs.back().run_id = uint64_t(r);
        runs.back().config_hash = hash;
    }
    return runs;
}

std::string cell_config_hash(const ExperimentSpec &spec, const SensorConfig &sensor,
                             const PixelPerturbation &perturbation) {
    std::ostringstream o;
    o << "dataset=" << spec.dataset << ";board=" << spec.board << ";seed=" << spec.seed
      << ";model=" << (spec.model_path.empty() ? std::to_string(spec.model_seed) : spec.model_path)
      << ";kernel=" << spec.kernel_index << ";pert=" << perturbation_canonical(perturbation)
      << ";pert_seed=" << perturbation.seed << ";" << spec.activity.canonical() << ";"
      << sensor.canonical() << ";" << attack_canonical(spec.attack);
    return hex64(fnv1a64(o.str()));
}

uint64_t image_seed(const ExperimentSpec &spec, const std::string &image_id) {
    return fnv1a64(image_id + "/" + spec.dataset, fnv1a64(std::to_string(spec.seed)));
}

namespace {

double safe_ccr_norm(const Grid &a, const Grid &b) {
    try {
        return ccr_norm(a, b);
    } catch (const Error &) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

struct CellOutput {
    std::vector<ReportRow> rows;
    std::vector<std::string> artifacts;
};

CellOutput evaluate_cell(const ExperimentSpec &spec, const SensorConfig &sensor,
                         const PixelPerturbation &perturbation, const BinaryKernel3x3 &kernel,
                         const SelectedImage &img, const std::vector<int> &run_counts) {
    const std::string hash = cell_config_hash(spec, sensor, perturbation);
    const auto runs = capture_image_runs(img.image, kernel, spec.activity, perturbation, sensor,
                                         run_counts.back(), image_seed(spec, img.id));
    const Grid original = img.image.to_grid();
    CellOutput out;
    for (int n : run_counts) {
        RecoveredImage rec = run_attack(average_prefix(runs, size_t(n)), spec.attack);
        rec.provenance = {n, hash, img.id};
        ReportRow row;
        row.image_id = img.id;
        row.n_runs = n;
        row.config_hash = hash;
        row.ccr = ccr(original, rec.denoised);
        row.ccr_norm_raw = safe_ccr_norm(original, rec.binary);
        row.ccr_norm_denoised = safe_ccr_norm(original, rec.denoised);
        row.mssim_raw = mssim(original, rec.binary);
        row.mssim_denoised = mssim(original, rec.denoised);
        out.rows.push_back(row);
        if (spec.write_artifacts) {
            namespace fs = std::filesystem;
            const fs::path dir = fs::path(spec.out_dir) / hash / img.id / std::to_string(n);
            auto put = [&](const char *name, const std::string &data) {
                const std::string p = (dir / name).string();
                write_file_atomic(p, data);
                out.artifacts.push_back(p);
            };
            put("avg.csv", trace_csv(rec.averaged.values, "hw_mean"));
            put("filtered.csv", trace_csv(rec.filtered.values, "filtered"));
            put("hist.csv", histogram_csv(rec.histogram));
            put("binary.pgm", encode_pgm(rec.binary));
            put("denoised.pgm", encode_pgm(rec.denoised));
            put("report.csv", report_csv_header() + "\n" + to_csv(row) + "\n");
        }
    }
    return out;
}

ExperimentResult run_cells(const ExperimentSpec &spec, const SensorConfig &sensor,
                           const PixelPerturbation &perturbation,
                           const std::vector<SelectedImage> &images, const BinaryKernel3x3 &kernel,
                           const std::vector<int> &run_counts) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CellOutput> cells(images.size());
    run_parallel(images.size(), spec.threads, [&](size_t j) {
        cells[j] = evaluate_cell(spec, sensor, perturbation, kernel, images[j], run_counts);
    });
    ExperimentResult r;
    for (auto &c : cells) {
        r.rows.insert(r.rows.end(), c.rows.begin(), c.rows.end());
        r.artifacts.insert(r.artifacts.end(), c.artifacts.begin(), c.artifacts.end());
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string summary_csv(const std::vector<ReportRow> &rows) {
    std::string s = report_csv_header() + "\n";
    for (const auto &r : rows)
        s += to_csv(r) + "\n";
    return s;
}

void emit(const ExperimentSpec &spec, std::vector<std::string> &artifacts, const std::string &rel,
          const std::string &data) {
    const std::string p = (std::filesystem::path(spec.out_dir) / rel).string();
    write_file_atomic(p, data);
    artifacts.push_back(p);
}

double mean_of(const std::vector<ReportRow> &rows, double ReportRow::*field) {
    double s = 0.0;
    for (const auto &r : rows)
        s += r.*field;
    return rows.empty() ? 0.0 : s / double(rows.size());
}

std::string experiment_markdown(const ExperimentSpec &spec, const SensorConfig &sensor,
                                const std::vector<ReportRow> &rows) {
    std::ostringstream o;
    o << "# " << spec.name << "\n\n"
      << "- board: " << spec.board << "\n- placement: " << spec.placement
      << " (attenuation " << sensor.attenuation << ")\n- dataset: " << spec.dataset
      << "\n- perturbation: " << spec.perturbation.describe() << "\n- seed: " << spec.seed
      << "\n- config-hash: " << (rows.empty() ? "" : rows.front().config_hash) << "\n\n"
      << "Denoised / raw normalised cross-correlation per image and run count.\n\n| image |";
    for (int n : spec.run_counts)
        o << ' ' << n << " |";
    o << "\n|---|";
    for (size_t i = 0; i < spec.run_counts.size(); ++i)
        o << "---|";
    o << '\n';
    const size_t k = spec.run_counts.size();
    for (size_t i = 0; i < rows.size(); i += k) {
        o << "| " << rows[i].image_id << " |";
        for (size_t j = 0; j < k; ++j)
            o << ' ' << fmt_metric(rows[i + j].ccr_norm_denoised) << " / "
              << fmt_metric(rows[i + j].ccr_norm_raw) << " |";
        o << '\n';
    }
    o << "| mean |";
    for (size_t j = 0; j < k; ++j) {
        double sd = 0, sr = 0;
        size_t cnt = 0;
        for (size_t i = j; i < rows.size(); i += k, ++cnt) {
            sd += rows[i].ccr_norm_denoised;
            sr += rows[i].ccr_norm_raw;
        }
        o << ' ' << fmt_metric(sd / double(cnt)) << " / " << fmt_metric(sr / double(cnt)) << " |";
    }
    o << '\n';
    return o.str();
}

std::string table_csv(const std::string &label_column, const std::vector<TableRow> &rows) {
    std::string s = label_column + "," + report_csv_header() + "\n";
    for (const auto &t : rows)
        for (const auto &r : t.rows)
            s += t.label + "," + to_csv(r) + "\n";
    return s;
}

std::string table_markdown(const std::string &title, const std::string &label_column,
                           const std::vector<TableRow> &rows) {
    std::ostringstream o;
    o << "## " << title << "\n\n| " << label_column
      << " | ccr_norm w/o denoise | ccr_norm w/ denoise |\n|---|---|---|\n";
    for (const auto &t : rows)
        o << "| " << t.label << " | " << fmt_metric(t.mean_raw) << " | "
          << fmt_metric(t.mean_denoised) << " |\n";
    return o.str() + "\n";
}

TableRow make_row(const std::string &label, std::vector<ReportRow> rows) {
    TableRow t;
    t.label = label;
    t.rows = std::move(rows);
    t.mean_raw = mean_of(t.rows, &ReportRow::ccr_norm_raw);
    t.mean_denoised = mean_of(t.rows, &ReportRow::ccr_norm_denoised);
    return t;
}

} // namespace

ExperimentResult run_experiment(const ExperimentSpec &spec) {
    spec.validate();
    const SensorConfig sensor = resolve_sensor(spec, spec.placement);
    const auto images = select_images(spec);
    ExperimentResult r =
        run_cells(spec, sensor, spec.perturbation, images, attack_kernel(spec), spec.run_counts);
    if (spec.write_artifacts && !r.rows.empty()) {
        const std::string h = r.rows.front().config_hash;
        emit(spec, r.artifacts, h + "/summary.csv", summary_csv(r.rows));
        emit(spec, r.artifacts, h + "/report.md", experiment_markdown(spec, sensor, r.rows));
    }
    return r;
}

SweepResult sweep_runs(const ExperimentSpec &spec) {
    if (spec.run_counts.size() < 2)
        throw Error(Errc::precondition, "a sweep needs at least two run counts");
    SweepResult s;
    s.detail = run_experiment(spec);
    const size_t k = spec.run_counts.size();
    std::vector<double> x, y;
    for (size_t j = 0; j < k; ++j) {
        CurvePoint p;
        p.n_runs = spec.run_counts[j];
        size_t cnt = 0;
        for (size_t i = j; i < s.detail.rows.size(); i += k, ++cnt) {
            p.ccr_norm_raw += s.detail.rows[i].ccr_norm_raw;
            p.ccr_norm_denoised += s.detail.rows[i].ccr_norm_denoised;
            p.mssim_raw += s.detail.rows[i].mssim_raw;
            p.mssim_denoised += s.detail.rows[i].mssim_denoised;
        }
        p.ccr_norm_raw /= double(cnt);
        p.ccr_norm_denoised /= double(cnt);
        p.mssim_raw /= double(cnt);
        p.mssim_denoised /= double(cnt);
        s.curve.push_back(p);
        x.push_back(p.n_runs);
        y.push_back(p.ccr_norm_denoised);
    }
    s.spearman_denoised = spearman(x, y);
    if (spec.write_artifacts) {
        std::string csv = "n-runs,ccr_norm_raw,ccr_norm_denoised,mssim_raw,mssim_denoised\n";
        for (const auto &p : s.curve)
            csv += std::to_string(p.n_runs) + "," + fmt_metric(p.ccr_norm_raw) + "," +
                   fmt_metric(p.ccr_norm_denoised) + "," + fmt_metric(p.mssim_raw) + "," +
                   fmt_metric(p.mssim_denoised) + "\n";
        emit(spec, s.detail.artifacts, s.detail.rows.front().config_hash + "/curve.csv", csv);
    }
    return s;
}

std::vector<TableRow> compare_placements(const ExperimentSpec &spec) {
    spec.validate();
    if (spec.placements.empty())
        throw Error(Errc::precondition, "no placements configured");
    const auto images = select_images(spec);
    const BinaryKernel3x3 kernel = attack_kernel(spec);
    const std::vector<int> counts{spec.run_counts.back()};
    std::vector<TableRow> table;
    std::vector<std::string> artifacts;
    for (const std::string &pl : spec.placements) {
        const SensorConfig sensor = resolve_sensor(spec, pl);
        ExperimentResult r = run_cells(spec, sensor, spec.perturbation, images, kernel, counts);
        table.push_back(make_row(pl, std::move(r.rows)));
    }
    if (spec.write_artifacts) {
        emit(spec, artifacts, "placements.csv", table_csv("placement", table));
        emit(spec, artifacts, "placements.md",
             "# " + spec.name + "\n\n" +
                 table_markdown("Placement (" + spec.board + ", " +
                                    std::to_string(counts.front()) + " runs)",
                                "placement", table));
    }
    return table;
}

RobustnessResult robustness_study(const ExperimentSpec &spec) {
    spec.validate();
    const auto images = select_images(spec);
    const BinaryKernel3x3 kernel = attack_kernel(spec);
    const SensorConfig sensor = resolve_sensor(spec, spec.placement);
    const std::vector<int> counts{spec.run_counts.back()};
    RobustnessResult out;
    for (int v : spec.backgrounds) {
        const PixelPerturbation p = v == 0 ? PixelPerturbation{}
                                           : PixelPerturbation::background_value(v);
        ExperimentResult r = run_cells(spec, sensor, p, images, kernel, counts);
        out.background.push_back(make_row("background=" + std::to_string(v), std::move(r.rows)));
    }
    for (int bits : spec.flip_bits)
        for (double prob : spec.flip_probabilities) {
            const PixelPerturbation p =
                prob == 0.0 ? PixelPerturbation{} : PixelPerturbation::flip(prob, bits, spec.seed);
            ExperimentResult r = run_cells(spec, sensor, p, images, kernel, counts);
            char label[48];
            std::snprintf(label, sizeof label, "flip%d=%g%%", bits, prob * 100.0);
            out.flip.push_back(make_row(label, std::move(r.rows)));
        }
    if (spec.write_artifacts) {
        std::vector<std::string> artifacts;
        std::vector<TableRow> all = out.background;
        all.insert(all.end(), out.flip.begin(), out.flip.end());
        emit(spec, artifacts, "robustness.csv", table_csv("perturbation", all));
        emit(spec, artifacts, "robustness.md",
             "# " + spec.name + "\n\n" +
                 table_markdown("Constant background", "perturbation", out.background) +
                 table_markdown("Low-bit flips", "perturbation", out.flip));
    }
    return out;
}

double spearman(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error(Errc::length_mismatch, "spearman needs two equal-length samples");
    auto ranks = [](const std::vector<double> &v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (size_t i = 0; i < idx.size();) {
            size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
                ++j;
            for (size_t k = i; k <= j; ++k)
                r[idx[k]] = 0.5 * double(i + j) + 1.0;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = double(x.size());
    const double mx = (n + 1) / 2;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - mx);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - mx) * (ry[i] - mx);
    }
    if (sxx == 0 || syy == 0)
        return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace bnnleak
