// Timing backend interface. The CUDA backend measures real hardware
// (provenance "hardware"); the simulation backend evaluates the same
// closed-form timing models the toolkit's emulator uses (provenance
// "emulator") so the harness flow and file format are testable anywhere.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace syncbench {

struct ProbeOutcome {
    std::string outcome;  // "completed" | "timeout"
    double elapsed_ns = 0.0;
};

class Backend {
  public:
    virtual ~Backend() = default;

    virtual std::string device_name() const = 0;
    virtual std::string provenance() const = 0;
    // Clock domain of repeat-chain and sync-sweep samples.
    virtual std::string kernel_clock_domain() const = 0;

    // False when the platform lacks a usable wait instruction; the reason is
    // surfaced so callers can fall back or abort loudly.
    virtual bool fusion_supported(std::string* reason) const = 0;

    // One timed arm: `launches` back-to-back kernels of `wait_units` units
    // each, one synchronize, CPU-clock nanoseconds for the whole arm.
    virtual double time_fusion_arm(int launches, int wait_units, bool warmup) = 0;

    // Kernel total latency for `repeats` dependent instruction repetitions.
    virtual double time_repeat_chain(const std::string& instr, int repeats) = 0;

    // Kernel total latency for `repeats` synchronizations at a sweep point.
    // Returns false (with a reason) when the point cannot run, e.g. a
    // cooperative-launch occupancy violation; such points are skipped.
    virtual bool time_sync_point(const std::string& level, int blocks_per_sm,
                                 int threads_per_block, int gpu_count,
                                 int repeats, double* out_value,
                                 std::string* skip_reason) = 0;

    // Per-thread (pre-barrier, post-barrier) timer pairs for one warp.
    virtual std::vector<std::pair<std::int64_t, std::int64_t>> warp_order_probe() = 0;

    // Synchronize only part of a thread group; watchdogged.
    virtual ProbeOutcome deadlock_probe(const std::string& granularity,
                                        int timeout_ms) = 0;
};

struct SimParams {
    double launch_overhead_ns = 1081.0;
    double wait_unit_ns = 10000.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::string arch = "volta";  // "volta" | "pascal"
    std::string device_name = "sim";
};

std::unique_ptr<Backend> make_sim_backend(const SimParams& params);

// Provided by the CUDA translation unit when built with nvcc; the host-only
// build returns nullptr.
std::unique_ptr<Backend> make_cuda_backend(int device_ordinal);

}  // namespace syncbench
