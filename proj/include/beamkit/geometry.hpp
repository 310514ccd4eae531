// geometry.hpp
// Linear microphone array geometry and plane-wave steering delays.
//
// Azimuth convention: theta is measured from the array axis, with theta = 0
// at the endfire direction of increasing microphone coordinate. A wave from
// theta reaches microphone m later than the reference by
//   (pos[m] - pos[ref]) * cos(theta) * fs / c   samples.
#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "beamkit/common.hpp"

namespace beamkit {

struct ArrayGeometry {
    std::vector<double> positions;                        // meters along the array axis
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // 0-based (p1, p2)
    std::size_t reference = 0;
    double sound_speed = 343.0;  // m/s

    std::size_t channels() const { return positions.size(); }

    double pair_distance(std::size_t p) const {
        require(p < pairs.size(), "invalid pair index");
        return std::fabs(positions[pairs[p].first] - positions[pairs[p].second]);
    }

    void validate() const {
        require(reference < channels(), "reference channel out of range");
        for (std::size_t p = 0; p < pairs.size(); p++) {
            require(pairs[p].first < channels() && pairs[p].second < channels(),
                    "pair index out of range");
            require(pair_distance(p) > 0.0, "zero-distance microphone pair");
        }
    }
};

// 8-element linear array with spacings 15-10-5-20-5-10-15 cm and the six
// pairs (1,8),(2,7),(3,6),(4,5),(5,8),(4,8), stored 0-based.
inline ArrayGeometry default_array() {
    ArrayGeometry g;
    g.positions = {0.0, 0.15, 0.25, 0.30, 0.50, 0.55, 0.65, 0.80};
    g.pairs = {{0, 7}, {1, 6}, {2, 5}, {3, 4}, {4, 7}, {3, 7}};
    g.reference = 0;
    return g;
}

// Sub-array with the first `m` microphones; pairs become (first, last) plus
// nested pairs inward. Used for reduced-size configurations.
inline ArrayGeometry default_subarray(std::size_t m) {
    ArrayGeometry full = default_array();
    require(m >= 2 && m <= full.channels(), "subarray size out of range");
    ArrayGeometry g;
    g.positions.assign(full.positions.begin(), full.positions.begin() + m);
    for (std::size_t i = 0; 2 * i + 1 < m; i++) g.pairs.push_back({i, m - 1 - i});
    g.reference = 0;
    return g;
}

// tau^(p)(theta) = d^(p) cos(theta) fs / c, in samples. Positive when the
// higher-coordinate microphone of the pair receives later.
inline double steering_delay(const ArrayGeometry& g, std::size_t pair_index, double theta_deg,
                             double sample_rate) {
    require(pair_index < g.pairs.size(), "invalid pair index");
    const auto& pr = g.pairs[pair_index];
    double d = g.positions[pr.second] - g.positions[pr.first];
    return d * std::cos(theta_deg * kPi / 180.0) * sample_rate / g.sound_speed;
}

// Per-channel delay relative to the reference channel, in samples.
inline double channel_delay(const ArrayGeometry& g, std::size_t m, double theta_deg,
                            double sample_rate) {
    require(m < g.channels(), "channel out of range");
    double d = g.positions[m] - g.positions[g.reference];
    return d * std::cos(theta_deg * kPi / 180.0) * sample_rate / g.sound_speed;
}

}  // namespace beamkit
