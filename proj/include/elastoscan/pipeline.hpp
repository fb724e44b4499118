#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/errors.hpp"
#include "elastoscan/mesh.hpp"
#include "elastoscan/ntd.hpp"

namespace elastoscan {

// One timestamped scalar channel as it comes off the acquisition system.
struct RawSeries {
    std::vector<double> time;    // seconds, strictly increasing
    std::vector<double> value;
};

// Scalar displacement pickup: position on the plate boundary plus the
// measured component.
struct SensorChannel {
    std::string name;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    int axis = 2;
};

// Trimmed, resampled excitation record. All channels share the uniform time
// grid; channel_positions is aligned with the displacement channels.
struct SweepRecord {
    std::vector<double> time;
    std::vector<std::vector<double>> force;
    std::vector<std::vector<double>> displacement;
    std::vector<SensorChannel> channel_positions;

    double rate_hz() const {
        return time.size() < 2 ? 0.0 : 1.0 / (time[1] - time[0]);
    }
};

namespace detail {

inline void check_raw_series(const RawSeries& s, const std::string& what) {
    if (s.time.size() != s.value.size())
        throw DimensionError(what + " has " + std::to_string(s.time.size()) + " stamps for " +
                             std::to_string(s.value.size()) + " values");
    if (s.time.size() < 2)
        throw InsufficientDataError(what + " needs at least two samples");
    for (size_t i = 1; i < s.time.size(); ++i)
        if (!(s.time[i] > s.time[i - 1]))
            throw TimeAlignmentError(what + " time stamps must be strictly increasing");
}

inline double median_step(const RawSeries& s) {
    std::vector<double> d(s.time.size() - 1);
    for (size_t i = 1; i < s.time.size(); ++i) d[i - 1] = s.time[i] - s.time[i - 1];
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    return d[d.size() / 2];
}

inline std::vector<double> resample_linear(const RawSeries& s, const std::vector<double>& grid) {
    std::vector<double> out(grid.size());
    size_t k = 0;
    for (size_t i = 0; i < grid.size(); ++i) {
        while (k + 2 < s.time.size() && s.time[k + 1] <= grid[i]) ++k;
        double w = (grid[i] - s.time[k]) / (s.time[k + 1] - s.time[k]);
        out[i] = (1.0 - w) * s.value[k] + w * s.value[k + 1];
    }
    return out;
}

}  // namespace detail

// Cuts both series sets to their shared time window, resamples onto a common
// uniform grid at the finest channel rate, and drops the leading and trailing
// segments where every force channel stays below 1% of the peak force.
inline SweepRecord trim_and_align(const std::vector<RawSeries>& force,
                                  const std::vector<RawSeries>& displacement,
                                  std::vector<SensorChannel> channels = {}) {
    if (force.empty())
        throw InsufficientDataError("trimming needs at least one force channel");
    if (!channels.empty() && channels.size() != displacement.size())
        throw DimensionError("got " + std::to_string(channels.size()) + " sensor positions for " +
                             std::to_string(displacement.size()) + " displacement channels");
    for (size_t i = 0; i < force.size(); ++i)
        detail::check_raw_series(force[i], "force channel " + std::to_string(i));
    for (size_t i = 0; i < displacement.size(); ++i)
        detail::check_raw_series(displacement[i], "displacement channel " + std::to_string(i));

    double t0 = force[0].time.front();
    double t1 = force[0].time.back();
    double dt = detail::median_step(force[0]);
    auto widen = [&](const RawSeries& s) {
        t0 = std::max(t0, s.time.front());
        t1 = std::min(t1, s.time.back());
        dt = std::min(dt, detail::median_step(s));
    };
    for (const auto& s : force) widen(s);
    for (const auto& s : displacement) widen(s);
    if (!(t1 > t0))
        throw TimeAlignmentError("force and displacement series do not share a time window");

    size_t n = static_cast<size_t>(std::floor((t1 - t0) / dt * (1.0 + 1e-12))) + 1;
    std::vector<double> grid(n);
    for (size_t i = 0; i < n; ++i) grid[i] = t0 + static_cast<double>(i) * dt;

    SweepRecord rec;
    for (const auto& s : force) rec.force.push_back(detail::resample_linear(s, grid));
    for (const auto& s : displacement) rec.displacement.push_back(detail::resample_linear(s, grid));

    double peak = 0.0;
    for (const auto& f : rec.force)
        for (double v : f) peak = std::max(peak, std::abs(v));
    if (peak == 0.0)
        throw TimeAlignmentError("force channels are silent over the shared window");
    double threshold = 0.01 * peak;
    size_t first = n, last = 0;
    for (size_t i = 0; i < n; ++i)
        for (const auto& f : rec.force)
            if (std::abs(f[i]) >= threshold) {
                first = std::min(first, i);
                last = std::max(last, i);
            }

    auto cut = [&](std::vector<double>& v) {
        v = std::vector<double>(v.begin() + first, v.begin() + last + 1);
    };
    rec.time = grid;
    cut(rec.time);
    for (auto& f : rec.force) cut(f);
    for (auto& d : rec.displacement) cut(d);
    rec.channel_positions = std::move(channels);
    return rec;
}

enum class WindowKind { hann, rectangular };

// Sweep bands that stay clear of the plate resonances.
inline std::vector<std::array<double, 2>> default_analysis_bands() {
    return {{{20.0, 27.0}, {40.0, 45.0}, {55.0, 57.0}}};
}

// Complex per-channel amplitudes at one analysis bin.
struct SpectralSample {
    double frequency = 0.0;                         // analyzed bin, Hz
    std::vector<std::complex<double>> force_amp;    // per excitation channel, N
    std::vector<std::complex<double>> disp_amp;     // per sensor channel, m
    std::vector<SensorChannel> channels;            // aligned with disp_amp
    double bin_width_hz = 0.0;
    bool in_band = true;
    WindowKind window = WindowKind::hann;
};

// Single-bin windowed DFT of every channel, normalized so a pure tone at the
// bin frequency reports its amplitude. The requested frequency snaps to the
// nearest bin; a frequency outside the analysis bands only clears in_band.
inline SpectralSample fourier_extract(const SweepRecord& record, double frequency_hz,
                                      WindowKind window = WindowKind::hann,
                                      const std::vector<std::array<double, 2>>& bands =
                                          default_analysis_bands()) {
    const size_t n = record.time.size();
    if (n < 8) throw InsufficientDataError("record too short for spectral extraction");
    for (const auto& c : record.force)
        if (c.size() != n) throw DimensionError("force channel length differs from the time grid");
    for (const auto& c : record.displacement)
        if (c.size() != n)
            throw DimensionError("displacement channel length differs from the time grid");
    if (!record.channel_positions.empty() &&
        record.channel_positions.size() != record.displacement.size())
        throw DimensionError("sensor positions do not match the displacement channels");

    const double dt = record.time[1] - record.time[0];
    if (!(dt > 0.0)) throw TimeAlignmentError("record time grid must increase");
    for (size_t i = 0; i < n; ++i)
        if (std::abs(record.time[i] - (record.time[0] + static_cast<double>(i) * dt)) > 1e-6 * dt)
            throw TimeAlignmentError("record is not on a uniform time grid");

    const double rate = 1.0 / dt;
    if (!std::isfinite(frequency_hz) || frequency_hz < 0.0)
        throw ConfigError("analysis frequency must be finite and >= 0");
    if (frequency_hz >= 0.5 * rate)
        throw ConfigError("analysis frequency " + std::to_string(frequency_hz) +
                          " Hz is at or above the Nyquist limit " + std::to_string(0.5 * rate) +
                          " Hz");

    const double bin = rate / static_cast<double>(n);
    const long k = std::lround(frequency_hz / bin);

    std::vector<double> w(n, 1.0);
    if (window == WindowKind::hann)
        for (size_t i = 0; i < n; ++i)
            w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                        static_cast<double>(n - 1));
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    const double factor = (k == 0 || 2 * static_cast<size_t>(k) == n) ? 1.0 : 2.0;
    const double dphi = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);

    auto extract = [&](const std::vector<double>& x) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i)
            acc += x[i] * w[i] * std::polar(1.0, -dphi * static_cast<double>(i));
        return factor / wsum * acc;
    };

    SpectralSample out;
    out.frequency = static_cast<double>(k) * bin;
    out.bin_width_hz = bin;
    out.window = window;
    for (const auto& c : record.force) out.force_amp.push_back(extract(c));
    for (const auto& c : record.displacement) out.disp_amp.push_back(extract(c));
    out.channels = record.channel_positions;
    out.in_band = false;
    for (const auto& b : bands)
        if (out.frequency >= b[0] && out.frequency <= b[1]) out.in_band = true;
    return out;
}

// Interpolating cubic spline with zero second derivative at both ends.
// Queries outside the station range continue the boundary cubic.
class NaturalCubicSpline {
  public:
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const size_t n = x_.size();
        if (y_.size() != n) throw DimensionError("spline station and value counts differ");
        if (n < 2) throw InsufficientDataError("spline needs at least two stations");
        for (size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw ConfigError("spline stations must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) return;

        std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
        for (size_t i = 1; i + 1 < n; ++i) {
            double h0 = x_[i] - x_[i - 1];
            double h1 = x_[i + 1] - x_[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        for (size_t r = 1; r < diag.size(); ++r) {
            double f = (x_[r + 1] - x_[r]) / diag[r - 1];
            diag[r] -= f * upper[r - 1];
            rhs[r] -= f * rhs[r - 1];
        }
        for (size_t r = diag.size(); r-- > 0;) {
            double carry = r + 1 < diag.size() ? upper[r] * m_[r + 2] : 0.0;
            m_[r + 1] = (rhs[r] - carry) / diag[r];
        }
    }

    double value(double t) const {
        size_t s = segment(t);
        if (t == x_[s]) return y_[s];
        if (t == x_[s + 1]) return y_[s + 1];
        double h = x_[s + 1] - x_[s];
        double a = (x_[s + 1] - t) / h;
        double b = (t - x_[s]) / h;
        return a * y_[s] + b * y_[s + 1] +
               ((a * a * a - a) * m_[s] + (b * b * b - b) * m_[s + 1]) * h * h / 6.0;
    }

    const std::vector<double>& stations() const { return x_; }

  private:
    size_t segment(double t) const {
        if (t <= x_.front()) return 0;
        if (t >= x_[x_.size() - 2]) return x_.size() - 2;
        return static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
    }

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;   // second derivatives at the stations
};

// One complex boundary amplitude at an arc-length station.
struct PositionedAmplitude {
    double arc = 0.0;
    std::complex<double> value{0.0, 0.0};
};

// Fills the missing stations by splining real and imaginary parts separately
// along the arc. Known stations pass through unchanged; a missing station that
// coincides with a known one is dropped rather than duplicated.
inline std::vector<PositionedAmplitude> interpolate_missing(std::vector<PositionedAmplitude> known,
                                                            const std::vector<double>& missing) {
    if (known.size() < 4)
        throw InsufficientDataError("spline completion needs at least four known stations");
    std::sort(known.begin(), known.end(),
              [](const PositionedAmplitude& a, const PositionedAmplitude& b) {
                  return a.arc < b.arc;
              });
    std::vector<double> xs(known.size()), re(known.size()), im(known.size());
    for (size_t i = 0; i < known.size(); ++i) {
        xs[i] = known[i].arc;
        re[i] = known[i].value.real();
        im[i] = known[i].value.imag();
    }
    NaturalCubicSpline sr(xs, re);
    NaturalCubicSpline si(xs, im);

    std::vector<PositionedAmplitude> out = known;
    for (double a : missing) {
        if (std::binary_search(xs.begin(), xs.end(), a)) continue;
        out.push_back({a, {sr.value(a), si.value(a)}});
    }
    std::sort(out.begin(), out.end(),
              [](const PositionedAmplitude& a, const PositionedAmplitude& b) {
                  return a.arc < b.arc;
              });
    return out;
}

struct MeasuredNtD {
    NtDMatrix matrix;
    double imag_norm = 0.0;        // Frobenius norm of the discarded imaginary part
    int interpolated_values = 0;   // node samples filled by splines rather than sensors
};

namespace detail {

constexpr double kSensorMatchTol = 1e-9;

// Arc coordinate along a lateral face: x on the y faces, y on the x faces.
inline double face_arc(Side side, const Eigen::Vector3d& p) {
    return (side == Side::ymin || side == Side::ymax) ? p.x() : p.y();
}

inline double face_plane(const Mesh& mesh, Side side) {
    switch (side) {
        case Side::xmin: return 0.0;
        case Side::xmax: return mesh.length_x;
        case Side::ymin: return 0.0;
        default: return mesh.length_y;
    }
}

inline double face_offset(Side side, const Eigen::Vector3d& p) {
    return (side == Side::xmin || side == Side::xmax) ? p.x() : p.y();
}

}  // namespace detail

// Projects measured boundary traces onto the load basis: the complex Gram
// C_ij = \int g_i . u_j dS is evaluated by the same facet quadrature as the
// forward NtD matrix, with node values taken from matching sensors or, where
// a sensor is absent, splined along the face at the node's height. Each
// record's displacement phases are referenced to its dominant force channel
// so an undamped response lands in the real part; the matrix keeps Re C
// symmetrized and the imaginary remainder is reported as a quality metric.
inline MeasuredNtD assemble_measured_ntd(const Mesh& mesh, const LoadBasis& basis,
                                         const std::vector<SpectralSample>& samples) {
    const int m = basis.size();
    if (static_cast<int>(samples.size()) != m)
        throw DimensionError("got " + std::to_string(samples.size()) +
                             " spectral samples for " + std::to_string(m) + " basis loads");
    const double f0 = samples[0].frequency;
    for (const auto& s : samples) {
        if (std::abs(s.frequency - f0) > 1e-9 * std::max(1.0, std::abs(f0)))
            throw ConfigError("spectral samples mix analysis frequencies");
        if (s.disp_amp.size() != s.channels.size())
            throw DimensionError("sample amplitudes do not match its sensor channels");
    }

    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    for (const auto& load : basis.loads)
        if (load.traction.size() != neumann.size())
            throw DimensionError("basis load does not match the mesh's Neumann facets");

    MeasuredNtD out;
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(m, m);

    for (int j = 0; j < m; ++j) {
        const SpectralSample& s = samples[j];

        std::complex<double> phase(1.0, 0.0);
        double strongest = 0.0;
        for (const auto& f : s.force_amp)
            if (std::abs(f) > strongest) {
                strongest = std::abs(f);
                phase = f / std::abs(f);
            }

        // Spline cache per face, height, and measured axis.
        std::map<std::tuple<int, long long, int>, std::array<NaturalCubicSpline, 2>> rows;
        std::map<std::pair<int, int>, std::complex<double>> resolved;

        auto node_value = [&](Side side, int node, int axis) {
            auto hit = resolved.find({node, axis});
            if (hit != resolved.end()) return hit->second;
            const Eigen::Vector3d& p = mesh.nodes[node];
            for (size_t c = 0; c < s.channels.size(); ++c)
                if (s.channels[c].axis == axis &&
                    (s.channels[c].position - p).norm() <= detail::kSensorMatchTol) {
                    std::complex<double> v = s.disp_amp[c] / phase;
                    resolved[{node, axis}] = v;
                    return v;
                }
            if (!is_lateral(side))
                throw CoverageError("no sensor at a plate-face node; interpolation only runs "
                                    "along lateral faces");
            std::tuple<int, long long, int> key{static_cast<int>(side),
                                                std::llround(p.z() * 1e9), axis};
            auto row = rows.find(key);
            if (row == rows.end()) {
                double plane = detail::face_plane(mesh, side);
                std::vector<std::pair<double, std::complex<double>>> knots;
                for (size_t c = 0; c < s.channels.size(); ++c) {
                    const SensorChannel& ch = s.channels[c];
                    if (ch.axis != axis) continue;
                    if (std::abs(detail::face_offset(side, ch.position) - plane) >
                        detail::kSensorMatchTol)
                        continue;
                    if (std::abs(ch.position.z() - p.z()) > detail::kSensorMatchTol) continue;
                    knots.push_back({detail::face_arc(side, ch.position), s.disp_amp[c] / phase});
                }
                if (knots.empty())
                    throw CoverageError("no sensors on the " + side_name(side) +
                                        " face cover a loaded patch (axis " +
                                        std::to_string(axis) + ")");
                if (knots.size() < 4)
                    throw InsufficientDataError(
                        "fewer than four sensors along the " + side_name(side) +
                        " face at z=" + std::to_string(p.z()) + " for axis " +
                        std::to_string(axis));
                std::sort(knots.begin(), knots.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                std::vector<double> xs(knots.size()), re(knots.size()), im(knots.size());
                for (size_t i = 0; i < knots.size(); ++i) {
                    xs[i] = knots[i].first;
                    re[i] = knots[i].second.real();
                    im[i] = knots[i].second.imag();
                }
                row = rows.emplace(key, std::array<NaturalCubicSpline, 2>{
                                            NaturalCubicSpline(xs, re), NaturalCubicSpline(xs, im)})
                          .first;
            }
            double arc = detail::face_arc(side, p);
            std::complex<double> v{row->second[0].value(arc), row->second[1].value(arc)};
            resolved[{node, axis}] = v;
            ++out.interpolated_values;
            return v;
        };

        for (int i = 0; i < m; ++i) {
            std::complex<double> acc(0.0, 0.0);
            for (size_t fi = 0; fi < neumann.size(); ++fi) {
                const Eigen::Vector3d& g = basis.loads[i].traction[fi];
                if (g.isZero(0.0)) continue;
                const BoundaryFacet& f = mesh.facets[neumann[fi]];
                for (int node : f.nodes)
                    for (int d = 0; d < 3; ++d)
                        if (g[d] != 0.0) acc += 0.25 * f.area * g[d] * node_value(f.side, node, d);
            }
            C(i, j) = acc;
        }
    }

    out.matrix.entries = 0.5 * (C.real() + C.real().transpose());
    out.matrix.omega = 2.0 * M_PI * f0;
    out.matrix.material_tag = "measured";
    out.imag_norm = C.imag().norm();
    return out;
}

// Spectral-norm noise bound from repeated measurements: largest deviation of
// a repeat from the entrywise mean, widened by a 1.5 safety factor.
struct NoiseEstimate {
    double delta = 0.0;
    std::string method = "max-deviation-x1.5";
    int repeats_used = 0;
};

inline NoiseEstimate estimate_noise(const std::vector<Eigen::MatrixXd>& repeats) {
    if (repeats.size() < 2)
        throw InsufficientDataError("noise estimation needs at least two repeated measurements");
    const auto rows = repeats[0].rows();
    const auto cols = repeats[0].cols();
    if (rows != cols) throw DimensionError("noise estimation expects square matrices");
    for (const auto& r : repeats)
        if (r.rows() != rows || r.cols() != cols)
            throw DimensionError("repeated measurements differ in size");

    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& r : repeats) mean += r;
    mean /= static_cast<double>(repeats.size());

    double worst = 0.0;
    for (const auto& r : repeats) {
        Eigen::MatrixXd d = r - mean;
        worst = std::max(worst, symmetric_spectral_norm(0.5 * (d + d.transpose())));
    }

    NoiseEstimate out;
    out.delta = 1.5 * worst;
    out.repeats_used = static_cast<int>(repeats.size());
    return out;
}

}  // namespace elastoscan
