// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/beamspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ppsdoa {

TfBeamTensor stft_per_sensor(const SnapshotBlock& block, int window_width, int dft_length) {
    const int n_data = block.snapshots;
    const int h = window_width, f = dft_length;
    if (h < 1 || h > n_data) throw std::invalid_argument("stft_per_sensor: invalid window width");
    if (f < h) throw std::invalid_argument("stft_per_sensor: DFT length shorter than window");

    const int h_lo = -(h / 2);            // -ceil((H-1)/2)
    const int h_hi = (h - 1) / 2;         // floor((H-1)/2)
    TfBeamTensor out;
    out.channels = block.sensors;
    out.p_min = block.n_min() - h_lo;     // window stays inside the data
    out.p_max = block.n_max() - h_hi;
    out.q_min = -(f / 2);
    out.q_max = (f - 1) / 2;
    out.window_width = h;
    out.dft_length = f;
    out.delta = block.delta;
    out.values.resize(std::size_t(out.channels) * out.frames() * out.bins());

    // twiddle table for exp(-j*2*pi*h*q/F), h offset by h_lo
    std::vector<cvec> twiddle(static_cast<std::size_t>(h));
    for (int hh = 0; hh < h; ++hh) {
        twiddle[hh].resize(out.bins());
        for (int q = out.q_min; q <= out.q_max; ++q)
            twiddle[hh][q - out.q_min] =
                std::polar(1.0, -2.0 * kPi * double(hh + h_lo) * double(q) / double(f));
    }

    for (int m = 0; m < block.sensors; ++m)
        for (int p = out.p_min; p <= out.p_max; ++p) {
            cplx* row = &out.at(m, p, out.q_min);
            for (int hh = 0; hh < h; ++hh) {
                const cplx sample = block.at(m, p + h_lo + hh) / double(h);
                const cvec& tw = twiddle[hh];
                for (int qi = 0; qi < out.bins(); ++qi) row[qi] += sample * tw[qi];
            }
        }
    return out;
}

TfBeamTensor beamform(const TfBeamTensor& sensor_tf) {
    const int m_count = sensor_tf.channels;
    TfBeamTensor out = sensor_tf;
    std::fill(out.values.begin(), out.values.end(), cplx{0.0, 0.0});

    // conj(w_b)_m = exp(-j*2*pi*m*b/M); plain DFT across the sensor axis
    CMatrix weights(static_cast<std::size_t>(m_count), static_cast<std::size_t>(m_count));
    for (int b = 0; b < m_count; ++b)
        for (int m = 0; m < m_count; ++m)
            weights.at(m, b) = std::polar(1.0 / m_count, -2.0 * kPi * double(m) * double(b) / m_count);

    const std::size_t cells = std::size_t(sensor_tf.frames()) * sensor_tf.bins();
    for (int b = 0; b < m_count; ++b) {
        cplx* dst = &out.values[std::size_t(b) * cells];
        for (int m = 0; m < m_count; ++m) {
            const cplx w = weights.at(m, b);
            const cplx* src = &sensor_tf.values[std::size_t(m) * cells];
            for (std::size_t i = 0; i < cells; ++i) dst[i] += w * src[i];
        }
    }
    return out;
}

double beampattern(double theta, double omega, double beam, const ArrayConfig& cfg) {
    const int m_count = cfg.sensors;
    const double x = omega * cfg.spacing / cfg.speed * std::sin(theta) + 2.0 * kPi * beam / m_count;
    const double den = std::sin(0.5 * x);
    if (std::abs(den) < 1e-9) return 1.0;
    const double num = std::sin(0.5 * m_count * x);
    return std::min(1.0, std::abs(num / den) / m_count);
}

std::optional<double> mainlobe_angle(double omega, double beam, const ArrayConfig& cfg) {
    if (!(omega > 0.0)) return std::nullopt;
    const double ratio = 2.0 * cfg.cutoff_omega() / omega;
    const double arg = (beam < cfg.sensors / 2.0) ? -ratio * beam / cfg.sensors
                                                  : ratio * (1.0 - beam / double(cfg.sensors));
    if (std::abs(arg) > 1.0) return std::nullopt;
    return std::asin(arg);
}

SupportSet local_maxima(const TfBeamTensor& beam_tf, bool include_same_beam_freq_neighbors) {
    const int m_count = beam_tf.channels;
    SupportSet out;
    out.beams.resize(std::size_t(m_count));
    for (int b = 0; b < m_count; ++b) {
        const int b_prev = (b + m_count - 1) % m_count;
        const int b_next = (b + 1) % m_count;
        for (int p = beam_tf.p_min; p <= beam_tf.p_max; ++p)
            for (int q = beam_tf.q_min; q <= beam_tf.q_max; ++q) {
                const double mag = std::abs(beam_tf.at(b, p, q));
                double best = 0.0;
                for (int qn : {q - 1, q + 1}) {
                    if (qn < beam_tf.q_min || qn > beam_tf.q_max) continue;
                    best = std::max(best, std::abs(beam_tf.at(b_prev, p, qn)));
                    best = std::max(best, std::abs(beam_tf.at(b_next, p, qn)));
                    if (include_same_beam_freq_neighbors)
                        best = std::max(best, std::abs(beam_tf.at(b, p, qn)));
                }
                if (mag >= best) out.beams[b].push_back({p, q, mag});
            }
    }
    return out;
}

SupportSet threshold_support(const SupportSet& support, double percentile) {
    if (percentile < 0.0 || percentile > 100.0)
        throw std::invalid_argument("threshold_support: percentile out of [0, 100]");
    rvec mags;
    for (const auto& b : support.beams)
        for (const SupportPoint& pt : b) mags.push_back(pt.magnitude);
    if (mags.empty()) return SupportSet{std::vector<std::vector<SupportPoint>>(support.beams.size())};
    std::sort(mags.begin(), mags.end());
    const double rank = percentile / 100.0 * double(mags.size() - 1);
    const std::size_t lo = std::size_t(rank);
    const double frac = rank - double(lo);
    const double eps = (lo + 1 < mags.size()) ? mags[lo] + frac * (mags[lo + 1] - mags[lo])
                                              : mags[lo];

    SupportSet out;
    out.beams.resize(support.beams.size());
    for (std::size_t b = 0; b < support.beams.size(); ++b)
        for (const SupportPoint& pt : support.beams[b])
            if (pt.magnitude >= eps) out.beams[b].push_back(pt);
    return out;
}

std::optional<int> dominant_beam(const SupportSet& support) {
    int best = -1;
    std::size_t best_count = 0;
    for (std::size_t b = 0; b < support.beams.size(); ++b)
        if (support.beams[b].size() > best_count) {
            best_count = support.beams[b].size();
            best = int(b);
        }
    if (best < 0) return std::nullopt;
    return best;
}

std::vector<SupportPoint> adjacent_union(const SupportSet& support, int beam) {
    const int m_count = int(support.beams.size());
    std::map<std::pair<int, int>, double> merged;
    for (int d : {-1, 0, 1}) {
        const int b = ((beam + d) % m_count + m_count) % m_count;
        for (const SupportPoint& pt : support.beams[b]) {
            auto [it, inserted] = merged.try_emplace({pt.p, pt.q}, pt.magnitude);
            if (!inserted) it->second = std::max(it->second, pt.magnitude);
        }
    }
    std::vector<SupportPoint> out;
    out.reserve(merged.size());
    for (const auto& [key, mag] : merged) out.push_back({key.first, key.second, mag});
    return out;
}

}  // namespace ppsdoa
