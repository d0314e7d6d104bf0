#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "backend.hpp"

namespace syncbench {
namespace {

constexpr double kRepeatChainBaseCycles = 5000.0;
constexpr double kSyncKernelBaseCycles = 3000.0;
constexpr int kThreadsPerSm = 2048;

class SimBackend final : public Backend {
  public:
    explicit SimBackend(const SimParams& params)
        : params_(params), engine_(params.seed), normal_(0.0, 1.0) {
        const bool volta = params_.arch == "volta";
        instr_cycles_["fadd"] = volta ? 4.0 : 6.0;
        instr_cycles_["fmul"] = volta ? 4.0 : 6.0;
    }

    std::string device_name() const override { return params_.device_name; }
    std::string provenance() const override { return "emulator"; }
    std::string kernel_clock_domain() const override { return "gpu_cycles"; }

    bool fusion_supported(std::string* reason) const override {
        if (params_.arch != "volta") {
            // Mirrors the hardware constraint: the wait instruction exists
            // from Volta on; older parts use calibrated spin loops instead.
            if (reason) *reason = "wait instruction unavailable before Volta; "
                                  "using calibrated spin-wait units";
        }
        return true;
    }

    double time_fusion_arm(int launches, int wait_units, bool warmup) override {
        double value = launches * params_.launch_overhead_ns +
                       static_cast<double>(launches) * wait_units * params_.wait_unit_ns;
        if (!warmup) {
            // First launch after context creation is measurably slower.
            value += 25.0 * params_.launch_overhead_ns;
        }
        return noisy(value);
    }

    double time_repeat_chain(const std::string& instr, int repeats) override {
        auto found = instr_cycles_.find(instr);
        if (found == instr_cycles_.end()) {
            throw std::runtime_error("unknown instruction label: " + instr);
        }
        return noisy(kRepeatChainBaseCycles + repeats * found->second);
    }

    bool time_sync_point(const std::string& level, int blocks_per_sm,
                         int threads_per_block, int gpu_count, int repeats,
                         double* out_value, std::string* skip_reason) override {
        const bool cooperative = level == "grid" || level == "multi_grid";
        if (cooperative && blocks_per_sm * threads_per_block > kThreadsPerSm) {
            if (skip_reason) {
                *skip_reason = "occupancy violation for cooperative launch";
            }
            return false;
        }
        const double latency = sync_latency_cycles(level, blocks_per_sm,
                                                   threads_per_block, gpu_count);
        *out_value = noisy(kSyncKernelBaseCycles + repeats * latency);
        return true;
    }

    std::vector<std::pair<std::int64_t, std::int64_t>> warp_order_probe() override {
        std::vector<std::pair<std::int64_t, std::int64_t>> timers;
        timers.reserve(32);
        for (int tid = 0; tid < 32; ++tid) {
            if (params_.arch == "volta") {
                // Barrier holds: every pre-timer beats every post-timer.
                timers.emplace_back(1000 + 2 * tid, 2000 + 2 * tid);
            } else {
                // Threads run through individually; global order violated.
                timers.emplace_back(1000 + 50 * tid, 1020 + 50 * tid);
            }
        }
        return timers;
    }

    ProbeOutcome deadlock_probe(const std::string& granularity,
                                int timeout_ms) override {
        // Partial-group sync deadlocks for grid-scoped groups and for
        // GPU-subsets of a multi-GPU group; warp and block subsets complete.
        const bool deadlocks = granularity == "grid_partial_block" ||
                               granularity == "multi_grid_partial_block" ||
                               granularity == "multi_grid_partial_gpu";
        if (deadlocks) {
            return {"timeout", timeout_ms * 1.0e6};
        }
        return {"completed", 50000.0};
    }

  private:
    double sync_latency_cycles(const std::string& level, int blocks_per_sm,
                               int threads_per_block, int gpu_count) {
        const bool volta = params_.arch == "volta";
        const int warps = (threads_per_block + 31) / 32;
        if (level == "warp") {
            return volta ? 22.0 : 1.0;
        }
        if (level == "block") {
            const int active = std::min(64, blocks_per_sm * warps);
            return (volta ? 22.0 : 218.0) + 2.0 * (active - 1);
        }
        if (level == "grid") {
            return 2500.0 + 500.0 * blocks_per_sm;
        }
        if (level == "multi_grid") {
            double plateau = 200.0;
            if (gpu_count >= 6) {
                plateau = 30000.0;
            } else if (gpu_count >= 2) {
                plateau = 15000.0;
            }
            return 2500.0 + 500.0 * blocks_per_sm + 3.0 * warps + plateau;
        }
        throw std::runtime_error("unknown sync level: " + level);
    }

    double noisy(double mean) {
        if (params_.noise_sigma <= 0.0) {
            return mean;
        }
        const double value = mean + params_.noise_sigma * normal_(engine_);
        if (value < 0.0) {
            throw std::runtime_error(
                "noise_sigma too large: generated a negative sample");
        }
        return value;
    }

    SimParams params_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    std::unordered_map<std::string, double> instr_cycles_;
};

}  // namespace

std::unique_ptr<Backend> make_sim_backend(const SimParams& params) {
    return std::make_unique<SimBackend>(params);
}

}  // namespace syncbench
