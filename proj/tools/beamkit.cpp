// beamkit CLI: scene simulation, feature dumps, oracle beamforming, training,
// separation, beam patterns and evaluation.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "beamkit/beampattern.hpp"
#include "beamkit/config.hpp"
#include "beamkit/dataset.hpp"
#include "beamkit/metrics.hpp"
#include "beamkit/oracle.hpp"
#include "beamkit/tensor_io.hpp"
#include "beamkit/trainer.hpp"

using namespace beamkit;

namespace {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

ArrayGeometry geometry_from_config(const std::string& config_path) {
    if (config_path.empty()) return default_array();
    auto j = load_json(config_path);
    if (j.contains("geometry")) return geometry_from_json(j.at("geometry"));
    return default_array();
}

std::string scene_wav_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d.wav", id);
    return buf;
}

// bank bound to trained parameters (or a seeded random bank)
LearnableFilterBank bank_from_params(const ParamStore& ps, const PipelineConfig& cfg,
                                     std::size_t reference) {
    LearnableFilterBank bank;
    bank.window_length = cfg.window_length;
    bank.filters = cfg.filters;
    bank.reference_channel = reference;
    const Tensor& k0 = ps.at("K0");
    bank.reference.assign(cfg.window_length, std::vector<double>(cfg.filters));
    for (std::size_t n = 0; n < cfg.window_length; n++)
        for (std::size_t f = 0; f < cfg.filters; f++) bank.reference[n][f] = k0.at(n, f);
    bank.windows.assign(cfg.channels, std::vector<double>(cfg.window_length, 1.0));
    for (std::size_t m = 0; m < cfg.channels; m++) {
        std::string key = "w_" + std::to_string(m + 1);
        if (ps.values.count(key))
            for (std::size_t n = 0; n < cfg.window_length; n++)
                bank.windows[m][n] = ps.at(key).v[n];
    }
    const Tensor& dec = ps.at("decoder");
    bank.decoder.assign(cfg.filters, std::vector<double>(cfg.window_length));
    for (std::size_t f = 0; f < cfg.filters; f++)
        for (std::size_t n = 0; n < cfg.window_length; n++) bank.decoder[f][n] = dec.at(f, n);
    return bank;
}

std::vector<double> run_oracle_method(const std::string& method, const Scene& sc,
                                      std::uint64_t seed) {
    FdSetup fd;
    TdSetup td;
    if (method == "ibm") return oracle_ideal_mask(sc, MaskKind::ibm, fd);
    if (method == "irm") return oracle_ideal_mask(sc, MaskKind::irm, fd);
    if (method == "ipsm") return oracle_ideal_mask(sc, MaskKind::ipsm, fd);
    if (method == "fd-eq-mvdr") return oracle_fd_mvdr(sc, fd);
    if (method == "fd-eq-mcwf") return oracle_fd_mcwf(sc, fd);
    if (method == "td-eq-mvdr") return oracle_td_mvdr(sc, td);
    if (method == "td-eq-mcwf") return oracle_td_mcwf(sc, td);
    if (method == "td-eq-mcwf-frame") return oracle_td_mcwf(sc, td, TdAveraging::per_frame);
    if (method == "latent-ti-mcwf" || method == "latent-tv-mcwf") {
        Rng rng(seed);
        auto bank = LearnableFilterBank::random(sc.geometry.channels(), 40, 128, rng,
                                                sc.geometry.reference);
        auto variant = method == "latent-ti-mcwf" ? LatentVariant::time_invariant
                                                  : LatentVariant::time_variant;
        return oracle_latent_mcwf(sc, bank, variant, td);
    }
    throw std::runtime_error("unknown method: " + method +
                             " (expected ibm|irm|ipsm|fd-eq-mvdr|fd-eq-mcwf|td-eq-mvdr|"
                             "td-eq-mcwf|td-eq-mcwf-frame|latent-ti-mcwf|latent-tv-mcwf)");
}

int cmd_simulate(const std::string& out_dir, int count, std::uint64_t seed, double duration,
                 const std::string& config_path) {
    auto geometry = geometry_from_config(config_path);
    auto records = generate_dataset(count, seed, geometry, out_dir, duration);
    write_manifest(out_dir + "/manifest.json", records);
    std::printf("wrote %zu scenes and manifest to %s\n", records.size(), out_dir.c_str());
    return 0;
}

int cmd_features(const std::string& config_path, const std::string& manifest_path,
                 const std::string& out_dir, const std::string& checkpoint_path,
                 std::uint64_t seed) {
    auto cfg = config_path.empty() ? PipelineConfig{}
                                   : pipeline_config_from_json(load_json(config_path));
    auto geometry = geometry_from_config(config_path);
    auto records = read_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);

    ParamStore ps;
    if (cfg.domain == Domain::td) {
        if (!checkpoint_path.empty()) {
            auto [header, params] = read_checkpoint(checkpoint_path);
            for (const auto& e : params.entries) ps.add(e.name, params.get_tensor(e.name));
        } else {
            TdPipeline pipe(cfg, geometry);
            Rng rng(seed ? seed : cfg.seed);
            pipe.init(ps, rng);
        }
    }

    for (const auto& rec : records) {
        auto sc = scene_from_record(rec, geometry);
        TensorContainer c;
        char stem[48];
        std::snprintf(stem, sizeof(stem), "scene_%04d_features.bkt", rec.id);
        std::string name = out_dir + "/" + stem;
        if (cfg.domain == Domain::fd) {
            auto kernel = StftKernel::sqrt_hann(cfg.window_length);
            auto spec = stft(sc.mixture, kernel, cfg.grid());
            auto st = fd_features(spec, geometry, rec.target_doa_deg, kernel,
                                  geometry.reference);
            std::size_t T = st.lps.size(), F = st.lps[0].size(), P = st.ipd.size();
            std::vector<double> flat;
            for (const auto& row : st.lps) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("lps", {T, F}, flat.data());
            flat.clear();
            for (const auto& p : st.ipd)
                for (const auto& row : p) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("ipd", {P, T, F}, flat.data());
            flat.clear();
            for (const auto& row : st.fd_df) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("fd_df", {T, F}, flat.data());
        } else {
            auto bank = bank_from_params(ps, cfg, geometry.reference);
            auto latent = encode(sc.mixture, bank, cfg.grid());
            auto st = td_features(latent, bank, geometry, rec.target_doa_deg, cfg.sample_rate);
            std::size_t T = st.r.size(), F = st.r[0].size(), P = st.icd.size();
            std::vector<double> flat;
            for (const auto& row : st.r) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("r", {T, F}, flat.data());
            flat.clear();
            for (const auto& p : st.icd)
                for (const auto& row : p) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("icd", {P, T, F}, flat.data());
            flat.clear();
            for (const auto& row : st.ld_df) flat.insert(flat.end(), row.begin(), row.end());
            c.add_f64("ld_df", {T, F}, flat.data());
        }
        c.write(name);
    }
    std::printf("wrote %zu feature dumps to %s\n", records.size(), out_dir.c_str());
    return 0;
}

int cmd_oracle_bf(const std::string& manifest_path, const std::string& method, bool oracle,
                  const std::string& out_dir, std::uint64_t seed,
                  const std::string& config_path) {
    require(oracle, "oracle-bf computes ground-truth statistics; pass --oracle to confirm "
                    "(use `separate` for checkpointed models)");
    auto geometry = geometry_from_config(config_path);
    auto records = read_manifest(manifest_path);
    require(!records.empty(), "empty manifest: " + manifest_path);
    std::filesystem::create_directories(out_dir + "/" + method);

    std::vector<EvalRecord> evals(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        auto sc = scene_from_record(records[i], geometry);
        auto est = run_oracle_method(method, sc, seed);
        auto path = out_dir + "/" + method + "/" + scene_wav_name(records[i].id);
        write_wav(path, MultichannelSignal::mono(est, sc.mixture.sample_rate),
                  WavFormat::float32);
        evals[i] = score(est, sc.target.ch(sc.geometry.reference), records[i], method);
    });

    auto table = report(evals);
    write_report_csv(out_dir + "/" + method + "_eval.csv", table);
    std::printf("%s: mean SI-SDR %.2f dB over %d scenes (report: %s)\n", method.c_str(),
                table.rows[0].overall_mean, table.rows[0].total,
                (out_dir + "/" + method + "_eval.csv").c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path, int epochs,
              std::uint64_t seed, const std::string& out_dir) {
    auto cfg = pipeline_config_from_json(load_json(config_path));
    if (seed) cfg.seed = seed;
    auto geometry = geometry_from_config(config_path);
    require(geometry.channels() == cfg.channels,
            "config channels do not match geometry channel count");
    auto records = read_manifest(manifest_path);
    require(!records.empty(), "empty manifest: " + manifest_path);

    std::vector<TrainScene> scenes;
    for (const auto& rec : records)
        scenes.push_back(to_train_scene(scene_from_record(rec, geometry)));

    ParamStore ps;
    Rng rng(cfg.seed);
    TrainConfig tc;
    tc.epochs = epochs;
    tc.lmfb_weight = cfg.lmfb_weight;
    TrainTrace trace;
    if (cfg.domain == Domain::td) {
        TdPipeline pipe(cfg, geometry);
        pipe.init(ps, rng);
        trace = train_pipeline(pipe, ps, scenes, scenes, tc);
    } else {
        FdPipeline pipe(cfg, geometry);
        pipe.init(ps, rng);
        trace = train_pipeline(pipe, ps, scenes, scenes, tc);
    }

    std::filesystem::create_directories(out_dir);
    TensorContainer params;
    nlohmann::json shapes = nlohmann::json::object();
    for (const auto& name : ps.order) {
        params.add_tensor(name, ps.at(name));
        shapes[name] = ps.at(name).shape;
    }
    auto cfg_json = to_json(cfg);
    nlohmann::json header = {{"config", cfg_json},
                             {"config_hash", config_hash(cfg_json)},
                             {"parameters", shapes}};
    write_checkpoint(out_dir + "/checkpoint.bkc", header, params);

    nlohmann::json trace_json = {{"train_loss", trace.train_loss},
                                 {"val_loss", trace.val_loss},
                                 {"learning_rate", trace.learning_rate},
                                 {"aborted_non_finite", trace.aborted_non_finite}};
    std::ofstream tf(out_dir + "/trace.json");
    tf << trace_json.dump(2) << "\n";

    if (trace.aborted_non_finite) {
        std::fprintf(stderr, "training diverged; last good checkpoint written to %s\n",
                     (out_dir + "/checkpoint.bkc").c_str());
        throw NumericalError("non-finite training loss");
    }
    std::printf("trained %d epochs; final loss %.4f; checkpoint: %s\n", epochs,
                trace.train_loss.empty() ? 0.0 : trace.train_loss.back(),
                (out_dir + "/checkpoint.bkc").c_str());
    return 0;
}

int cmd_separate(const std::string& checkpoint_path, const std::string& manifest_path,
                 const std::string& out_dir, const std::string& config_path) {
    auto [header, params] = read_checkpoint(checkpoint_path);
    auto cfg = pipeline_config_from_json(header.at("config"));
    auto geometry = geometry_from_config(config_path);
    auto records = read_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);

    ParamStore ps;
    for (const auto& e : params.entries) ps.add(e.name, params.get_tensor(e.name));

    std::vector<EvalRecord> evals;
    for (const auto& rec : records) {
        auto sc = scene_from_record(rec, geometry);
        std::vector<double> est;
        Tape tape;
        Ctx ctx{tape, ps};
        if (cfg.domain == Domain::td) {
            TdPipeline pipe(cfg, geometry);
            auto fwd = pipe.forward(ctx, sc.mixture, rec.target_doa_deg);
            est = ad::V(fwd.estimate).v;
        } else {
            FdPipeline pipe(cfg, geometry);
            auto fwd = pipe.forward(ctx, sc.mixture, rec.target_doa_deg);
            est = ad::V(fwd.estimate).v;
        }
        for (double v : est)
            if (!std::isfinite(v)) throw NumericalError("non-finite model output");
        write_wav(out_dir + "/" + scene_wav_name(rec.id),
                  MultichannelSignal::mono(est, sc.mixture.sample_rate), WavFormat::float32);
        evals.push_back(score(est, sc.target.ch(geometry.reference), rec, "model"));
    }
    auto table = report(evals);
    write_report_csv(out_dir + "/eval.csv", table);
    std::printf("separated %zu scenes; mean SI-SDR %.2f dB\n", records.size(),
                table.rows[0].overall_mean);
    return 0;
}

int cmd_beampattern(const std::string& manifest_path, int scene_index,
                    const std::string& method, const std::string& freqs_csv,
                    const std::string& out_path, const std::string& config_path) {
    auto geometry = geometry_from_config(config_path);
    auto records = read_manifest(manifest_path);
    require(scene_index >= 0 && std::size_t(scene_index) < records.size(),
            "scene index out of range");
    auto sc = scene_from_record(records[scene_index], geometry);

    std::vector<double> freqs;
    {
        std::stringstream ss(freqs_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) freqs.push_back(std::stod(tok));
        require(!freqs.empty(), "no frequencies given");
    }
    std::vector<double> thetas;
    for (int a = 0; a <= 180; a++) thetas.push_back(double(a));

    std::vector<std::vector<double>> gains;
    if (method == "fd-eq-mvdr") {
        FdSetup setup;
        auto w = oracle_fd_mvdr_weights(sc, setup);
        gains = beam_pattern_fd(w, geometry, freqs, thetas, sc.mixture.sample_rate,
                                setup.grid.window_length);
    } else if (method == "td-eq-mvdr" || method == "td-eq-mcwf") {
        TdSetup setup;
        auto yf = frame(sc.mixture, setup.grid);
        TdWeights w;
        if (method == "td-eq-mvdr") {
            auto sf = frame(sc.target, setup.grid);
            auto nf = frame(sc.interferer, setup.grid);
            auto h = td_mvdr_steering(sf, geometry.reference);
            w = td_eq_mvdr_per_sample(nf, h, geometry.reference);
        } else {
            auto s_ref = frame_channel(sc.target.ch(geometry.reference), setup.grid);
            w = td_eq_mcwf_per_sample(yf, s_ref);
        }
        gains = beam_pattern_td(average_spatial_weights(w), geometry, freqs, thetas);
    } else {
        throw std::runtime_error("unknown beampattern method: " + method);
    }
    write_beam_pattern_csv(out_path, thetas, freqs, gains);
    std::printf("wrote beam pattern to %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& estimate_dir,
             const std::string& method, const std::string& out_path,
             const std::string& config_path) {
    auto geometry = geometry_from_config(config_path);
    auto records = read_manifest(manifest_path);
    require(!records.empty(), "empty manifest: " + manifest_path);
    std::vector<EvalRecord> evals;
    for (const auto& rec : records) {
        auto target = read_wav(rec.target_path);
        auto est = read_wav(estimate_dir + "/" + scene_wav_name(rec.id));
        evals.push_back(score(est.ch(0), target.ch(geometry.reference), rec, method));
    }
    auto table = report(evals);
    write_report_csv(out_path, table);
    std::printf("%s: mean SI-SDR %.2f dB over %d scenes\n", method.c_str(),
                table.rows[0].overall_mean, table.rows[0].total);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"beamkit: multichannel target speech separation toolkit"};
    app.require_subcommand(1);

    std::string out_dir = "out", config_path, manifest_path, checkpoint_path;
    std::string method = "td-eq-mcwf", freqs_csv = "1000,2000,3000", out_path = "pattern.csv";
    std::string estimate_dir;
    int count = 8, epochs = 10, scene_index = 0;
    std::uint64_t seed = 0;
    double duration = 1.0;
    bool oracle = false;

    auto* sim = app.add_subcommand("simulate", "generate a scene dataset and manifest");
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--count", count, "number of scenes");
    sim->add_option("--seed", seed, "dataset seed");
    sim->add_option("--duration", duration, "scene duration in seconds");
    sim->add_option("--config", config_path, "JSON config (for geometry)");

    auto* feat = app.add_subcommand("features", "dump feature tensors per scene");
    feat->add_option("--config", config_path, "JSON config");
    feat->add_option("--manifest", manifest_path, "dataset manifest")->required();
    feat->add_option("--out", out_dir, "output directory")->required();
    feat->add_option("--checkpoint", checkpoint_path, "trained parameters (td banks)");
    feat->add_option("--seed", seed, "bank seed when no checkpoint is given");

    auto* obf = app.add_subcommand("oracle-bf", "beamform with ground-truth statistics");
    obf->add_option("--manifest", manifest_path, "dataset manifest")->required();
    obf->add_option("--method", method, "ibm|irm|ipsm|fd-eq-mvdr|fd-eq-mcwf|td-eq-mvdr|"
                                        "td-eq-mcwf|td-eq-mcwf-frame|latent-ti-mcwf|"
                                        "latent-tv-mcwf")->required();
    obf->add_flag("--oracle", oracle, "confirm use of ground-truth statistics");
    obf->add_option("--out", out_dir, "output directory")->required();
    obf->add_option("--seed", seed, "bank seed for latent methods");
    obf->add_option("--config", config_path, "JSON config (for geometry)");

    auto* tr = app.add_subcommand("train", "train a pipeline on a dataset");
    tr->add_option("--config", config_path, "JSON config")->required();
    tr->add_option("--manifest", manifest_path, "dataset manifest")->required();
    tr->add_option("--epochs", epochs, "training epochs");
    tr->add_option("--seed", seed, "override config seed");
    tr->add_option("--out", out_dir, "output directory")->required();

    auto* sep = app.add_subcommand("separate", "run a trained checkpoint on scenes");
    sep->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
    sep->add_option("--manifest", manifest_path, "dataset manifest")->required();
    sep->add_option("--out", out_dir, "output directory")->required();
    sep->add_option("--config", config_path, "JSON config (for geometry)");

    auto* bp = app.add_subcommand("beampattern", "emit beam-pattern CSV for one scene");
    bp->add_option("--manifest", manifest_path, "dataset manifest")->required();
    bp->add_option("--scene", scene_index, "scene index");
    bp->add_option("--method", method, "fd-eq-mvdr|td-eq-mvdr|td-eq-mcwf");
    bp->add_option("--freqs", freqs_csv, "comma-separated frequencies in Hz");
    bp->add_option("--out", out_path, "output CSV path");
    bp->add_option("--config", config_path, "JSON config (for geometry)");

    auto* ev = app.add_subcommand("eval", "score estimate WAVs against references");
    ev->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ev->add_option("--estimate-dir", estimate_dir, "directory with scene_####.wav")->required();
    ev->add_option("--method", method, "method label for the report");
    ev->add_option("--out", out_path, "output CSV path")->required();
    ev->add_option("--config", config_path, "JSON config (for geometry)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(out_dir, count, seed, duration, config_path);
        if (feat->parsed())
            return cmd_features(config_path, manifest_path, out_dir, checkpoint_path, seed);
        if (obf->parsed())
            return cmd_oracle_bf(manifest_path, method, oracle, out_dir, seed, config_path);
        if (tr->parsed()) return cmd_train(config_path, manifest_path, epochs, seed, out_dir);
        if (sep->parsed())
            return cmd_separate(checkpoint_path, manifest_path, out_dir, config_path);
        if (bp->parsed())
            return cmd_beampattern(manifest_path, scene_index, method, freqs_csv, out_path,
                                   config_path);
        if (ev->parsed())
            return cmd_eval(manifest_path, estimate_dir, method, out_path, config_path);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::string what = e.what();
        std::fprintf(stderr, "error: %s\n", what.c_str());
        bool numerical = what.find("singular") != std::string::npos ||
                         what.find("non-finite") != std::string::npos ||
                         what.find("degenerate") != std::string::npos;
        return numerical ? 4 : 3;
    }
    return 2;
}
