// config.hpp
// JSON (de)serialization of the pipeline configuration and array geometry,
// plus the configuration hash stored in checkpoints.
#pragma once

#include <string>

#include <json.hpp>

#include "beamkit/geometry.hpp"
#include "beamkit/pipeline.hpp"

namespace beamkit {

inline nlohmann::json to_json(const ArrayGeometry& g) {
    nlohmann::json pairs = nlohmann::json::array();
    for (auto [a, b] : g.pairs) pairs.push_back({a, b});
    return nlohmann::json{{"positions", g.positions},
                          {"pairs", pairs},
                          {"reference", g.reference},
                          {"sound_speed", g.sound_speed}};
}

inline ArrayGeometry geometry_from_json(const nlohmann::json& j) {
    ArrayGeometry g;
    g.positions = j.at("positions").get<std::vector<double>>();
    for (const auto& p : j.at("pairs"))
        g.pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    g.reference = j.value("reference", 0);
    g.sound_speed = j.value("sound_speed", 343.0);
    g.validate();
    return g;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
    return nlohmann::json{
        {"domain", c.domain == Domain::fd ? "fd" : "td"},
        {"channels", c.channels},
        {"window_length", c.window_length},
        {"hop", c.hop},
        {"filters", c.filters},
        {"variant", to_string(c.variant)},
        {"multichannel_mask", c.multichannel_mask},
        {"lmfb_weight", c.lmfb_weight},
        {"seed", c.seed},
        {"sample_rate", c.sample_rate},
        {"tcn",
         {{"bottleneck", c.tcn_bottleneck},
          {"hidden", c.tcn_hidden},
          {"repeats", c.tcn_repeats},
          {"blocks", c.tcn_blocks}}},
        {"td_head", {{"proj", c.head_proj}, {"gru", c.head_gru}}},
        {"fd_head", {{"proj", c.fd_head_proj}, {"gru", c.fd_head_gru}}}};
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    std::string domain = j.value("domain", "td");
    require(domain == "fd" || domain == "td", "config: domain must be fd or td");
    c.domain = domain == "fd" ? Domain::fd : Domain::td;
    // domain defaults per the reference configuration
    c.window_length = c.domain == Domain::fd ? 512 : 40;
    c.hop = c.domain == Domain::fd ? 256 : 20;
    c.channels = j.value("channels", std::size_t(8));
    c.window_length = j.value("window_length", c.window_length);
    c.hop = j.value("hop", c.hop);
    c.filters = j.value("filters", std::size_t(256));
    c.variant = bf_variant_from_string(j.value("variant", std::string("an-mcwf")));
    c.multichannel_mask = j.value("multichannel_mask", false);
    c.lmfb_weight = j.value("lmfb_weight", 0.0);
    c.seed = j.value("seed", std::uint64_t(1));
    c.sample_rate = j.value("sample_rate", 16000.0);
    if (j.contains("tcn")) {
        const auto& t = j.at("tcn");
        c.tcn_bottleneck = t.value("bottleneck", c.tcn_bottleneck);
        c.tcn_hidden = t.value("hidden", c.tcn_hidden);
        c.tcn_repeats = t.value("repeats", c.tcn_repeats);
        c.tcn_blocks = t.value("blocks", c.tcn_blocks);
    }
    if (j.contains("td_head")) {
        c.head_proj = j.at("td_head").value("proj", c.head_proj);
        c.head_gru = j.at("td_head").value("gru", c.head_gru);
    }
    if (j.contains("fd_head")) {
        c.fd_head_proj = j.at("fd_head").value("proj", c.fd_head_proj);
        c.fd_head_gru = j.at("fd_head").value("gru", c.fd_head_gru);
    }
    require(c.hop > 0 && c.hop <= c.window_length, "config: need 0 < hop <= window_length");
    return c;
}

// FNV-1a over the canonical JSON dump
inline std::uint64_t config_hash(const nlohmann::json& j) {
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace beamkit
