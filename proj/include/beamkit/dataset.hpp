// dataset.hpp
// Deterministic mini-dataset generation: WAV triples per scene plus a JSON
// manifest with DOAs, SIR, seed and azimuth-difference bucket.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamkit/common.hpp"
#include "beamkit/scene.hpp"
#include "beamkit/wav.hpp"

namespace beamkit {

// half-open buckets [0,15), [15,45), [45,90), [90,180]
inline int azimuth_bucket(double diff_deg) {
    double d = std::fabs(diff_deg);
    if (d < 15.0) return 0;
    if (d < 45.0) return 1;
    if (d < 90.0) return 2;
    return 3;
}

inline const char* bucket_label(int b) {
    static const char* labels[4] = {"<15", "15-45", "45-90", ">90"};
    require(b >= 0 && b < 4, "bucket out of range");
    return labels[b];
}

struct SceneRecord {
    int id = 0;
    std::string mixture_path, target_path, interferer_path;
    double target_doa_deg = 0.0, interferer_doa_deg = 0.0, sir_db = 0.0;
    std::uint64_t seed = 0;
    std::string bucket;
};

inline nlohmann::json to_json(const SceneRecord& r) {
    return nlohmann::json{{"id", r.id},
                          {"mixture_path", r.mixture_path},
                          {"target_path", r.target_path},
                          {"interferer_path", r.interferer_path},
                          {"target_doa_deg", r.target_doa_deg},
                          {"interferer_doa_deg", r.interferer_doa_deg},
                          {"sir_db", r.sir_db},
                          {"seed", r.seed},
                          {"bucket", r.bucket}};
}

inline SceneRecord scene_record_from_json(const nlohmann::json& j) {
    SceneRecord r;
    r.id = j.at("id").get<int>();
    r.mixture_path = j.at("mixture_path").get<std::string>();
    r.target_path = j.at("target_path").get<std::string>();
    r.interferer_path = j.at("interferer_path").get<std::string>();
    r.target_doa_deg = j.at("target_doa_deg").get<double>();
    r.interferer_doa_deg = j.at("interferer_doa_deg").get<double>();
    r.sir_db = j.at("sir_db").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.bucket = j.at("bucket").get<std::string>();
    return r;
}

// Draw DOAs on a 1-degree grid with |difference| in the requested bucket.
inline void sample_doas_in_bucket(Rng& rng, int bucket, double& target, double& interferer) {
    const double lo[4] = {1.0, 15.0, 45.0, 90.001};
    const double hi[4] = {14.0, 44.0, 89.0, 179.0};
    for (int attempt = 0; attempt < 4096; attempt++) {
        double t = double(rng.uniform_index(181));
        double i = double(rng.uniform_index(181));
        double d = std::fabs(t - i);
        if (d >= lo[bucket] && d <= hi[bucket]) {
            target = t;
            interferer = i;
            return;
        }
    }
    require(false, "DOA sampling failed");
}

// SceneSpec for scene `index` of a dataset run; independent of other scenes.
inline SceneSpec dataset_scene_spec(std::uint64_t seed, int index, double duration_s,
                                    bool bucket_balanced = true) {
    Rng rng = Rng::derived(seed, 100 + std::uint64_t(index));
    SceneSpec spec;
    spec.seed = rng.next_u64();
    spec.duration_s = duration_s;
    spec.sir_db = rng.uniform(-6.0, 6.0);
    int bucket = bucket_balanced ? (index % 4) : int(rng.uniform_index(4));
    sample_doas_in_bucket(rng, bucket, spec.target_doa_deg, spec.interferer_doa_deg);
    return spec;
}

// Writes `count` scenes under out_dir and returns the manifest records.
// Scenes are derived from (seed, index) so generation is order-independent.
inline std::vector<SceneRecord> generate_dataset(int count, std::uint64_t seed,
                                                 const ArrayGeometry& geometry,
                                                 const std::string& out_dir,
                                                 double duration_s = 1.0,
                                                 double sample_rate = 16000.0) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec || fs::exists(out_dir), "cannot create output directory: " + out_dir);

    std::vector<SceneRecord> records(std::size_t(std::max(count, 0)));
    parallel_for(std::size_t(std::max(count, 0)), [&](std::size_t i) {
        SceneSpec spec = dataset_scene_spec(seed, int(i), duration_s);
        Scene scene = simulate_scene(spec, geometry, sample_rate);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "scene_%04zu", i);
        SceneRecord r;
        r.id = int(i);
        r.mixture_path = out_dir + "/" + stem + "_mix.wav";
        r.target_path = out_dir + "/" + stem + "_target.wav";
        r.interferer_path = out_dir + "/" + stem + "_interf.wav";
        r.target_doa_deg = spec.target_doa_deg;
        r.interferer_doa_deg = spec.interferer_doa_deg;
        r.sir_db = spec.sir_db;
        r.seed = spec.seed;
        r.bucket = bucket_label(azimuth_bucket(spec.target_doa_deg - spec.interferer_doa_deg));
        write_wav(r.mixture_path, scene.mixture, WavFormat::float32);
        write_wav(r.target_path, scene.target, WavFormat::float32);
        write_wav(r.interferer_path, scene.interferer, WavFormat::float32);
        records[i] = r;
    });
    return records;
}

// Paths are stored relative to the manifest's own directory, so a seeded
// dataset is bit-identical no matter where it lands.
inline void write_manifest(const std::string& path, const std::vector<SceneRecord>& records) {
    auto base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : records) {
        SceneRecord rel = r;
        auto relativize = [&](std::string& p) {
            if (p.empty()) return;
            std::error_code ec;
            auto q = std::filesystem::proximate(std::filesystem::absolute(p), base, ec);
            if (!ec) p = q.string();
        };
        relativize(rel.mixture_path);
        relativize(rel.target_path);
        relativize(rel.interferer_path);
        j.push_back(to_json(rel));
    }
    std::ofstream out(path);
    require(out.good(), "cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    require(out.good(), "write failed: " + path);
}

inline std::vector<SceneRecord> read_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open: " + path);
    nlohmann::json j;
    in >> j;
    require(j.is_array(), "manifest must be a JSON array: " + path);
    auto base = std::filesystem::path(path).parent_path();
    std::vector<SceneRecord> records;
    for (const auto& e : j) {
        auto r = scene_record_from_json(e);
        auto resolve = [&](std::string& p) {
            if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
        };
        resolve(r.mixture_path);
        resolve(r.target_path);
        resolve(r.interferer_path);
        records.push_back(std::move(r));
    }
    return records;
}

// rebuild a scene from its manifest record and WAV triple
inline Scene scene_from_record(const SceneRecord& r, const ArrayGeometry& geometry) {
    Scene sc;
    sc.mixture = read_wav(r.mixture_path);
    sc.target = read_wav(r.target_path);
    sc.interferer = read_wav(r.interferer_path);
    require(sc.mixture.channels() == geometry.channels(),
            "scene channel count does not match geometry: " + r.mixture_path);
    sc.geometry = geometry;
    sc.spec.target_doa_deg = r.target_doa_deg;
    sc.spec.interferer_doa_deg = r.interferer_doa_deg;
    sc.spec.sir_db = r.sir_db;
    sc.spec.seed = r.seed;
    sc.spec.duration_s = double(sc.mixture.length()) / sc.mixture.sample_rate;
    return sc;
}

}  // namespace beamkit
