// Compares the OpenMP kernels against their serial reference
// implementations: same inputs, checked for equality, timed per call.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evtrack/frame.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/nndc_internal.hpp"
#include "evtrack/reference.hpp"

using namespace evt;
using Clock = std::chrono::steady_clock;

namespace {

double ms_per_call(const std::function<void()>& fn, int iterations) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < iterations; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iterations;
}

BinaryFrame random_frame(int w, int h, double density, std::mt19937_64& rng) {
    BinaryFrame f(w, h);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (uni(rng) < density) f.set(x, y);
    return f;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-22s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                equal ? "outputs match" : "OUTPUTS DIFFER");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif
    std::mt19937_64 rng(7);

    {
        const BinaryFrame frame = random_frame(240, 180, 0.12, rng);
        const BinaryFrame serial_out = reference::median_filter(frame, 3);
        const BinaryFrame parallel_out = median_filter(frame, 3);
        report("median_filter 240x180",
               ms_per_call([&] { (void)reference::median_filter(frame, 3); }, 50),
               ms_per_call([&] { (void)median_filter(frame, 3); }, 50),
               serial_out == parallel_out);
    }
    {
        const BinaryFrame frame = random_frame(240, 180, 0.12, rng);
        const BinaryFrame serial_out = reference::downsize(frame, 6, 3);
        const BinaryFrame parallel_out = downsize(frame, 6, 3);
        report("downsize 6x3",
               ms_per_call([&] { (void)reference::downsize(frame, 6, 3); }, 200),
               ms_per_call([&] { (void)downsize(frame, 6, 3); }, 200),
               serial_out == parallel_out);
    }
    {
        Network net;
        net.init_weights(11);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<TrainingSample> batch(16);
        for (TrainingSample& s : batch) {
            s.patch = DualFrame(42, 42);
            for (int y = 0; y < 42; ++y)
                for (int x = 0; x < 42; ++x) {
                    if (uni(rng) < 0.2) s.patch.on.set(x, y);
                    if (uni(rng) < 0.2) s.patch.off.set(x, y);
                }
            s.target_class = 1 + int(uni(rng) * 4);
            s.target_bb_conf = 0.8;
            s.target_box = {40, 40, 20, 40};
            s.rp_x = 38;
            s.rp_y = 42;
        }
        std::vector<std::string> names(5, "c");
        std::vector<GtBox> gt = {{{40, 40, 20, 40}, 1}, {{0, 0, 30, 90}, 2},
                                 {{10, 5, 14, 20}, 3},  {{60, 60, 20, 48}, 4}};
        const AnchorSet anchors = compute_anchors(gt, 5, names);
        const SensorGeometry g{240, 180};

        // serial route: per-sample gradients summed one by one
        const auto serial_grad = [&] {
            std::vector<double> sum(net.params().size(), 0.0);
            std::vector<double> one(net.params().size(), 0.0);
            for (const TrainingSample& s : batch) {
                std::fill(one.begin(), one.end(), 0.0);
                net.sample_gradient(s, anchors, g, 5.0, one);
                for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += one[i];
            }
            for (double& v : sum) v /= double(batch.size());
            return sum;
        };
        const std::vector<double> serial_out = serial_grad();
        const std::vector<double> parallel_out = net.backward(batch, anchors, g, 5.0);
        report("batch gradient (16)",
               ms_per_call([&] { (void)serial_grad(); }, 3),
               ms_per_call([&] { (void)net.backward(batch, anchors, g, 5.0); }, 3),
               serial_out == parallel_out);
    }
    return 0;
}
