#include "evtrack/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"

namespace evt {

namespace {

constexpr int M = kKfStateDim;
constexpr int N = kKfMeasDim;

// measurement picks [cx, cy, w, h] out of [cx, cy, vx, vy, w, h]
constexpr int kMeasIndex[N] = {0, 1, 4, 5};

void mat_mul(const double a[M][M], const double b[M][M], double out[M][M]) {
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            double acc = 0;
            for (int k = 0; k < M; ++k) acc += a[i][k] * b[k][j];
            out[i][j] = acc;
        }
}

/// In-place inverse of a small symmetric positive-definite matrix via
/// Gauss-Jordan with partial pivoting.
void invert4(double a[N][N]) {
    double inv[N][N] = {};
    for (int i = 0; i < N; ++i) inv[i][i] = 1.0;
    for (int col = 0; col < N; ++col) {
        int pivot = col;
        for (int r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (a[pivot][col] == 0.0) throw InternalError("singular innovation covariance");
        if (pivot != col)
            for (int c = 0; c < N; ++c) {
                std::swap(a[pivot][c], a[col][c]);
                std::swap(inv[pivot][c], inv[col][c]);
            }
        const double d = a[col][col];
        for (int c = 0; c < N; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (int r = 0; r < N; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (int c = 0; c < N; ++c) {
                a[r][c] -= f * a[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) a[i][j] = inv[i][j];
}

}  // namespace

BoundingBox KalmanTrack::box(const SensorGeometry& g) const {
    BoundingBox b;
    b.w = std::max(1, int(std::lround(state[4])));
    b.h = std::max(1, int(std::lround(state[5])));
    b.x = int(std::lround(state[0] - state[4] / 2));
    b.y = int(std::lround(state[1] - state[5] / 2));
    return b.clamped(g);
}

KalmanTracker::KalmanTracker(SensorGeometry geometry, KFConfig config, int num_classes)
    : geometry_(geometry), config_(config), num_classes_(num_classes) {}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost,
                           double forbidden) {
    const int rows = int(cost.size());
    const int cols = rows ? int(cost.front().size()) : 0;
    std::vector<int> assignment(std::size_t(rows), -1);
    if (rows == 0 || cols == 0) return assignment;

    const int dim = std::max(rows, cols);
    const double kInf = std::numeric_limits<double>::infinity();
    auto value = [&](int i, int j) -> double {
        if (i < rows && j < cols) return cost[std::size_t(i)][std::size_t(j)];
        return forbidden;  // padding for the square problem
    };

    // potentials method, 1-indexed
    std::vector<double> u(std::size_t(dim) + 1, 0.0), v(std::size_t(dim) + 1, 0.0);
    std::vector<int> p(std::size_t(dim) + 1, 0), way(std::size_t(dim) + 1, 0);
    for (int i = 1; i <= dim; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(std::size_t(dim) + 1, kInf);
        std::vector<bool> used(std::size_t(dim) + 1, false);
        do {
            used[std::size_t(j0)] = true;
            const int i0 = p[std::size_t(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= dim; ++j) {
                if (used[std::size_t(j)]) continue;
                const double cur =
                    value(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
                if (cur < minv[std::size_t(j)]) {
                    minv[std::size_t(j)] = cur;
                    way[std::size_t(j)] = j0;
                }
                if (minv[std::size_t(j)] < delta) {
                    delta = minv[std::size_t(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= dim; ++j) {
                if (used[std::size_t(j)]) {
                    u[std::size_t(p[std::size_t(j)])] += delta;
                    v[std::size_t(j)] -= delta;
                } else {
                    minv[std::size_t(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[std::size_t(j0)] != 0);
        do {
            const int j1 = way[std::size_t(j0)];
            p[std::size_t(j0)] = p[std::size_t(j1)];
            j0 = j1;
        } while (j0);
    }
    for (int j = 1; j <= dim; ++j) {
        const int i = p[std::size_t(j)];
        if (i >= 1 && i <= rows && j <= cols &&
            cost[std::size_t(i - 1)][std::size_t(j - 1)] < forbidden)
            assignment[std::size_t(i - 1)] = j - 1;
    }
    return assignment;
}

std::vector<TrackRow> KalmanTracker::step(std::int64_t frame_idx,
                                          std::vector<Detection> detections,
                                          OpCounters* counters, KfBranchStats* stats) {
    const KfTerms terms = kf_terms(M, N);
    std::uint64_t ops = 0;
    if (stats) stats->frames += 1;

    if (int(detections.size()) > config_.max_trackers) {
        std::stable_sort(detections.begin(), detections.end(),
                         [](const Detection& a, const Detection& b) {
                             return a.bb_conf > b.bb_conf;
                         });
        detections.resize(std::size_t(config_.max_trackers));
    }
    const int n_det = int(detections.size());
    if (stats) stats->detections += std::uint64_t(n_det);

    // predict every live track; the assignment-cost row counts with it
    for (KalmanTrack& t : tracks_) {
        double f[M][M] = {};
        for (int i = 0; i < M; ++i) f[i][i] = 1.0;
        f[0][2] = 1.0;
        f[1][3] = 1.0;

        double next[M] = {};
        for (int i = 0; i < M; ++i)
            for (int k = 0; k < M; ++k) next[i] += f[i][k] * t.state[k];
        std::copy(next, next + M, t.state);

        double fp[M][M], fpft[M][M];
        mat_mul(f, t.cov, fp);
        double ft[M][M];
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) ft[i][j] = f[j][i];
        mat_mul(fp, ft, fpft);
        const double q[M] = {config_.process_noise_pos, config_.process_noise_pos,
                             config_.process_noise_vel, config_.process_noise_vel,
                             config_.process_noise_size, config_.process_noise_size};
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j) t.cov[i][j] = fpft[i][j] + (i == j ? q[i] : 0.0);

        t.lifetime_frames += 1;
        ops += std::uint64_t(terms.c_p + terms.c_cost);
        if (stats) stats->track_predictions += 1;
    }

    // assignment on 1 - IoU with gating at zero overlap
    std::vector<std::vector<double>> cost(tracks_.size(),
                                          std::vector<double>(std::size_t(n_det), 0.0));
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        const BoundingBox tb = tracks_[i].box(geometry_);
        for (int j = 0; j < n_det; ++j) {
            const double v = iou(tb, detections[std::size_t(j)].box);
            cost[i][std::size_t(j)] = v > 0.0 ? 1.0 - v : 1e9;
        }
    }
    const double c_ha = kf_hungarian_ops(double(n_det));
    ops += std::uint64_t(std::llround(c_ha));
    if (stats) stats->hungarian_ops += c_ha;
    const std::vector<int> assigned = hungarian(cost, 1e9);

    std::vector<bool> det_used(std::size_t(n_det), false);
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        KalmanTrack& t = tracks_[i];
        const int j = assigned[i];
        if (j >= 0) {
            det_used[std::size_t(j)] = true;
            const Detection& d = detections[std::size_t(j)];
            const double z[N] = {d.box.x + d.box.w / 2.0, d.box.y + d.box.h / 2.0,
                                 double(d.box.w), double(d.box.h)};
            // innovation and gain
            double y[N];
            for (int r = 0; r < N; ++r) y[r] = z[r] - t.state[kMeasIndex[r]];
            double s[N][N];
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < N; ++c)
                    s[r][c] = t.cov[kMeasIndex[r]][kMeasIndex[c]] +
                              (r == c ? config_.measurement_noise : 0.0);
            invert4(s);
            double pht[M][N];
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < N; ++c) pht[r][c] = t.cov[r][kMeasIndex[c]];
            double gain[M][N] = {};
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < N; ++c)
                    for (int k = 0; k < N; ++k) gain[r][c] += pht[r][k] * s[k][c];
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < N; ++c) t.state[r] += gain[r][c] * y[c];
            double kh[M][M] = {};
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < N; ++c) kh[r][kMeasIndex[c]] = gain[r][c];
            double ikh[M][M];
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < M; ++c) ikh[r][c] = (r == c ? 1.0 : 0.0) - kh[r][c];
            double newp[M][M];
            mat_mul(ikh, t.cov, newp);
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < M; ++c) t.cov[r][c] = newp[r][c];

            t.visible_frames += 1;
            t.invisible_frames = 0;
            t.class_votes.push_back(d.class_id);
            ops += std::uint64_t(terms.c_c);
            if (stats) stats->track_corrections += 1;
        } else {
            t.invisible_frames += 1;
            ops += std::uint64_t(terms.c_u);
            if (stats) stats->track_updates_unassigned += 1;
        }
    }

    // cull lost tracks
    std::erase_if(tracks_, [&](const KalmanTrack& t) {
        const double visibility =
            t.lifetime_frames > 0 ? double(t.visible_frames) / t.lifetime_frames : 1.0;
        return t.invisible_frames > config_.max_invisible ||
               visibility < config_.min_visibility;
    });

    // unassigned detections seed immediately-valid tracks
    for (int j = 0; j < n_det; ++j) {
        if (det_used[std::size_t(j)]) continue;
        if (int(tracks_.size()) >= config_.max_trackers) break;
        const Detection& d = detections[std::size_t(j)];
        KalmanTrack t;
        t.track_id = next_track_id_++;
        t.state[0] = d.box.x + d.box.w / 2.0;
        t.state[1] = d.box.y + d.box.h / 2.0;
        t.state[4] = d.box.w;
        t.state[5] = d.box.h;
        for (int i = 0; i < M; ++i) t.cov[i][i] = config_.initial_covariance;
        t.lifetime_frames = 1;
        t.visible_frames = 1;
        t.class_votes.assign(1, d.class_id);
        tracks_.push_back(t);
        ops += std::uint64_t(terms.c_new);
        if (stats) stats->detections_unassigned += 1;
    }

    if (counters) counters->kf_ops += ops;

    std::vector<TrackRow> rows;
    for (const KalmanTrack& t : tracks_) {
        TrackRow row;
        row.frame_idx = frame_idx;
        row.track_id = t.track_id;
        int best = kUnknownClass, best_count = 0;
        std::vector<int> tally;
        for (int v : t.class_votes) {
            if (v < 0) continue;
            if (int(tally.size()) <= v) tally.resize(std::size_t(v) + 1, 0);
            if (++tally[std::size_t(v)] > best_count) {
                best_count = tally[std::size_t(v)];
                best = v;
            }
        }
        row.class_id = best;
        row.box = t.box(geometry_);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace evt
