// masks.hpp
// Oracle time-frequency masks computed from ground-truth source
// spectrograms at the reference channel:
//   IBM  = 1[|S| > |N|]            (ties break to 0)
//   IRM  = |S| / (|S| + |N| + eps)
//   IPSM = clip(|S| cos(angle S - angle Y) / (|Y| + eps), 0, 2)
#pragma once

#include <cmath>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

enum class MaskKind { ibm, irm, ipsm };

struct IdealMask {
    MaskKind kind = MaskKind::irm;
    std::vector<std::vector<double>> values;  // [t][f]
};

inline IdealMask ideal_mask(const ComplexSpectrogram& s, const ComplexSpectrogram& n,
                            const ComplexSpectrogram& y, MaskKind kind,
                            std::size_t ref_channel = 0) {
    require(s.frames() == n.frames() && s.bands() == n.bands() && s.frames() == y.frames() &&
                s.bands() == y.bands(),
            "ideal_mask: spectrogram shapes differ");
    const double eps = 1e-8;
    IdealMask out;
    out.kind = kind;
    out.values.assign(s.frames(), std::vector<double>(s.bands(), 0.0));
    for (std::size_t t = 0; t < s.frames(); t++) {
        for (std::size_t f = 0; f < s.bands(); f++) {
            cplx sv = s.values[ref_channel][t][f];
            cplx nv = n.values[ref_channel][t][f];
            cplx yv = y.values[ref_channel][t][f];
            double sa = std::abs(sv), na = std::abs(nv), ya = std::abs(yv);
            switch (kind) {
                case MaskKind::ibm:
                    out.values[t][f] = sa > na ? 1.0 : 0.0;
                    break;
                case MaskKind::irm:
                    out.values[t][f] = sa / (sa + na + eps);
                    break;
                case MaskKind::ipsm: {
                    double v = sa * std::cos(std::arg(sv) - std::arg(yv)) / (ya + eps);
                    out.values[t][f] = std::min(2.0, std::max(0.0, v));
                    break;
                }
            }
        }
    }
    return out;
}

// multiplicative application to the reference channel of Y
inline std::vector<std::vector<cplx>> apply_mask(const IdealMask& mask,
                                                 const ComplexSpectrogram& y,
                                                 std::size_t ref_channel = 0) {
    std::vector<std::vector<cplx>> out(y.frames(), std::vector<cplx>(y.bands()));
    for (std::size_t t = 0; t < y.frames(); t++)
        for (std::size_t f = 0; f < y.bands(); f++)
            out[t][f] = mask.values[t][f] * y.values[ref_channel][t][f];
    return out;
}

}  // namespace beamkit
