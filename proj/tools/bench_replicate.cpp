// Times the serial reference against the OpenMP replicate path on a
// representative workload and verifies both produce identical metrics.

#include "popvote/engine.hpp"
#include "popvote/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <string>

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool same_metrics(const std::vector<popvote::RunMetrics>& a,
                  const std::vector<popvote::RunMetrics>& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].interactions != b[i].interactions || a[i].messages != b[i].messages ||
            a[i].phase1_end != b[i].phase1_end || a[i].converged_at != b[i].converged_at) {
            return false;
        }
    }
    return true;
}

} // namespace

int main(int argc, char** argv)
{
    std::uint32_t replicas = 512;
    if (argc > 1) {
        replicas = static_cast<std::uint32_t>(std::stoul(argv[1]));
    }

    popvote::RunConfig config;
    config.protocol = popvote::Protocol::Bdmv;
    config.topology = popvote::TopologySpec{popvote::TopologyKind::Mesh, 400};
    config.set_rho2(0.7);
    config.seed = 2024;

    std::printf("workload: bdmv on mesh n=400, rho2=0.7, %u replicas\n", replicas);

    auto t0 = std::chrono::steady_clock::now();
    const auto serial = popvote::run_replicas_serial(config, replicas);
    const double serial_s = seconds_since(t0);
    std::printf("serial:   %8.3f s\n", serial_s);

    t0 = std::chrono::steady_clock::now();
    const auto parallel = popvote::run_replicas_parallel(config, replicas, popvote::threads_from_env());
    const double parallel_s = seconds_since(t0);
    std::printf("parallel: %8.3f s  (speedup %.2fx)\n", parallel_s, serial_s / parallel_s);

    if (!same_metrics(serial, parallel)) {
        std::printf("MISMATCH: parallel metrics differ from serial reference\n");
        return 1;
    }
    std::printf("parallel metrics identical to serial reference\n");
    return 0;
}
