// syncbench: micro-benchmark harness producing measurement files the
// analysis toolkit ingests directly. Eight benchmarks cover launch-overhead
// fusion runs, instruction repeat differencing, synchronization sweeps from
// warp to multi-GPU scope, warp barrier ordering probes and partial-group
// deadlock probes. A --simulate backend evaluates closed-form timing models
// so the full flow runs without a GPU.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "backend.hpp"
#include "emit.hpp"

namespace syncbench {

#ifndef HAVE_CUDA
std::unique_ptr<Backend> make_cuda_backend(int) { return nullptr; }
int run_deadlock_case_blocking(const std::string&) { return 0; }
#else
int run_deadlock_case_blocking(const std::string& granularity);
#endif

namespace {

const char* const kBenchmarks[] = {
    "launch_fusion", "instr_repeatdiff", "warp_sync", "block_sync",
    "grid_sync", "multi_grid_sync", "warp_order_probe", "deadlock_probe",
};

const char* const kDeadlockCases[] = {
    "warp_partial", "block_partial", "grid_partial_block",
    "multi_grid_partial_block", "multi_grid_partial_gpu",
};

struct Options {
    std::string benchmark;
    std::string out;
    bool simulate = false;
    int device_ordinal = 0;
    std::string device_name;

    SimParams sim;

    int runs = 5;
    int launches_i = 5;
    int wait_units_j = 1;
    bool warmup = true;

    std::string instr = "fadd";
    int r1 = 1024;
    int r2 = 512;
    int min_repeat_gap = 16;

    std::vector<int> threads = {32, 64, 128, 256, 512, 1024};
    std::vector<int> blocks = {1, 2, 4, 8, 16, 32};
    int gpus = 1;
    int sync_r1 = 64;
    int sync_r2 = 32;

    int timeout_ms = 2000;
    std::string deadlock_child;  // internal: run one case in-process
};

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    size_t start = 0;
    while (start <= text.size()) {
        size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        values.push_back(std::stoi(text.substr(start, comma - start)));
        start = comma + 1;
    }
    return values;
}

void usage(std::FILE* stream) {
    std::fprintf(stream,
        "usage: syncbench <benchmark> --out PATH [options]\n"
        "\nbenchmarks:\n"
        "  launch_fusion      mirrored (i launches, j wait units) arms\n"
        "  instr_repeatdiff   dependent-chain repeat differencing\n"
        "  warp_sync          warp barrier sweep (use min reducer downstream)\n"
        "  block_sync         block barrier sweep\n"
        "  grid_sync          cooperative grid barrier sweep\n"
        "  multi_grid_sync    multi-GPU cooperative barrier sweep\n"
        "  warp_order_probe   per-thread timers around one warp barrier\n"
        "  deadlock_probe     partial-group synchronization under a watchdog\n"
        "\noptions:\n"
        "  --out PATH           measurement file to write (required)\n"
        "  --simulate           closed-form backend (provenance: emulator)\n"
        "  --device-ordinal N   CUDA device to use (default 0)\n"
        "  --device-name NAME   override the device label in the file header\n"
        "  --runs N             samples per arm (default 5)\n"
        "  --i N / --j N        fusion design pair (default 5 / 1)\n"
        "  --no-warmup          skip the warm-up launch (first arm inflates)\n"
        "  --instr NAME         instruction label (default fadd)\n"
        "  --r1 N / --r2 N      repeat counts (default 1024 / 512)\n"
        "  --min-repeat-gap N   required r1-r2 so the estimate stays tight\n"
        "  --threads LIST       threads/block sweep (default 32..1024)\n"
        "  --blocks LIST        blocks/SM sweep (default 1..32)\n"
        "  --gpus N             GPU count for multi-grid (default 1)\n"
        "  --sync-r1/--sync-r2  sync repeat pair (default 64 / 32)\n"
        "  --timeout-ms N       deadlock watchdog budget (default 2000)\n"
        "  --seed N --sigma F   simulation noise controls\n"
        "  --overhead-ns F --wait-unit-ns F --arch volta|pascal\n");
}

Options parse_options(int argc, char** argv) {
    Options opt;
    if (argc < 2) {
        usage(stderr);
        std::exit(2);
    }
    opt.benchmark = argv[1];
    if (opt.benchmark == "--help" || opt.benchmark == "-h") {
        usage(stdout);
        std::exit(0);
    }
    bool known = false;
    for (const char* name : kBenchmarks) {
        known |= opt.benchmark == name;
    }
    if (!known) {
        std::fprintf(stderr, "error: unknown benchmark '%s'\n",
                     opt.benchmark.c_str());
        std::exit(2);
    }

    auto need_value = [&](int index) -> std::string {
        if (index + 1 >= argc) {
            std::fprintf(stderr, "error: %s needs a value\n", argv[index]);
            std::exit(2);
        }
        return argv[index + 1];
    };

    for (int index = 2; index < argc; ++index) {
        const std::string arg = argv[index];
        if (arg == "--out") opt.out = need_value(index++);
        else if (arg == "--simulate") opt.simulate = true;
        else if (arg == "--device-ordinal") opt.device_ordinal = std::stoi(need_value(index++));
        else if (arg == "--device-name") opt.device_name = need_value(index++);
        else if (arg == "--runs") opt.runs = std::stoi(need_value(index++));
        else if (arg == "--i") opt.launches_i = std::stoi(need_value(index++));
        else if (arg == "--j") opt.wait_units_j = std::stoi(need_value(index++));
        else if (arg == "--no-warmup") opt.warmup = false;
        else if (arg == "--instr") opt.instr = need_value(index++);
        else if (arg == "--r1") opt.r1 = std::stoi(need_value(index++));
        else if (arg == "--r2") opt.r2 = std::stoi(need_value(index++));
        else if (arg == "--min-repeat-gap") opt.min_repeat_gap = std::stoi(need_value(index++));
        else if (arg == "--threads") opt.threads = parse_int_list(need_value(index++));
        else if (arg == "--blocks") opt.blocks = parse_int_list(need_value(index++));
        else if (arg == "--gpus") opt.gpus = std::stoi(need_value(index++));
        else if (arg == "--sync-r1") opt.sync_r1 = std::stoi(need_value(index++));
        else if (arg == "--sync-r2") opt.sync_r2 = std::stoi(need_value(index++));
        else if (arg == "--timeout-ms") opt.timeout_ms = std::stoi(need_value(index++));
        else if (arg == "--seed") opt.sim.seed = std::stoull(need_value(index++));
        else if (arg == "--sigma") opt.sim.noise_sigma = std::stod(need_value(index++));
        else if (arg == "--overhead-ns") opt.sim.launch_overhead_ns = std::stod(need_value(index++));
        else if (arg == "--wait-unit-ns") opt.sim.wait_unit_ns = std::stod(need_value(index++));
        else if (arg == "--arch") opt.sim.arch = need_value(index++);
        else if (arg == "--deadlock-child") opt.deadlock_child = need_value(index++);
        else {
            std::fprintf(stderr, "error: unknown option '%s'\n", arg.c_str());
            std::exit(2);
        }
    }

    if (opt.deadlock_child.empty() && opt.out.empty()) {
        std::fprintf(stderr, "error: --out is required\n");
        std::exit(2);
    }
    if (opt.runs < 1 || opt.launches_i < 1 || opt.wait_units_j < 1) {
        std::fprintf(stderr, "error: runs, --i and --j must be >= 1\n");
        std::exit(2);
    }
    if (opt.r1 <= opt.r2 || opt.r2 < 1) {
        std::fprintf(stderr, "error: need --r1 > --r2 >= 1\n");
        std::exit(2);
    }
    if (opt.r1 - opt.r2 < opt.min_repeat_gap ||
        opt.sync_r1 - opt.sync_r2 < opt.min_repeat_gap) {
        std::fprintf(stderr,
                     "error: repeat gap below --min-repeat-gap %d; the "
                     "difference estimate would be too noisy\n",
                     opt.min_repeat_gap);
        std::exit(2);
    }
    for (int threads : opt.threads) {
        if (threads < 32 || threads > 1024 || threads % 32 != 0) {
            std::fprintf(stderr, "error: --threads entries must be warp "
                                 "multiples in [32, 1024]\n");
            std::exit(2);
        }
    }
    for (int blocks : opt.blocks) {
        if (blocks < 1 || blocks > 64) {
            std::fprintf(stderr, "error: --blocks entries must be in [1, 64]\n");
            std::exit(2);
        }
    }
    return opt;
}

std::string sync_level(const std::string& benchmark) {
    if (benchmark == "warp_sync") return "warp";
    if (benchmark == "block_sync") return "block";
    if (benchmark == "grid_sync") return "grid";
    return "multi_grid";
}

void run_launch_fusion(Backend& backend, const Options& opt,
                       MeasurementWriter& writer) {
    std::string reason;
    if (!backend.fusion_supported(&reason)) {
        throw std::runtime_error("launch_fusion unsupported: " + reason);
    }
    if (!reason.empty()) {
        std::fprintf(stderr, "note: %s\n", reason.c_str());
    }
    const int i = opt.launches_i;
    const int j = opt.wait_units_j;
    const std::string id = "fusion-" + std::to_string(i) + "-" + std::to_string(j);
    writer.add_experiment({id, "fusion", {
        {"launches_i", std::to_string(i)},
        {"wait_units_j", std::to_string(j)},
    }});
    bool first = true;
    for (int run = 0; run < opt.runs; ++run) {
        const bool warm = opt.warmup || !first;
        first = false;
        writer.add_sample({id + "/ij", "cpu_ns", run,
                           backend.time_fusion_arm(i, j, warm)});
        writer.add_sample({id + "/ji", "cpu_ns", run,
                           backend.time_fusion_arm(j, i, true)});
    }
}

void run_instr_repeatdiff(Backend& backend, const Options& opt,
                          MeasurementWriter& writer) {
    const std::string id = "repeatdiff-" + opt.instr + "-" +
                           std::to_string(opt.r1) + "-" + std::to_string(opt.r2);
    writer.add_experiment({id, "repeatdiff", {
        {"instr", opt.instr},
        {"repeats_r1", std::to_string(opt.r1)},
        {"repeats_r2", std::to_string(opt.r2)},
    }});
    const std::string domain = backend.kernel_clock_domain();
    for (int run = 0; run < opt.runs; ++run) {
        writer.add_sample({id + "/k1", domain, run,
                           backend.time_repeat_chain(opt.instr, opt.r1)});
        writer.add_sample({id + "/k2", domain, run,
                           backend.time_repeat_chain(opt.instr, opt.r2)});
    }
}

void run_sync_sweep(Backend& backend, const Options& opt,
                    MeasurementWriter& writer) {
    const std::string level = sync_level(opt.benchmark);
    const std::string domain = backend.kernel_clock_domain();
    int emitted = 0;
    for (int threads : opt.threads) {
        for (int blocks : opt.blocks) {
            double probe = 0.0;
            std::string skip;
            if (!backend.time_sync_point(level, blocks, threads, opt.gpus,
                                         opt.sync_r2, &probe, &skip)) {
                std::fprintf(stderr, "skip: %s t=%d b=%d g=%d: %s\n",
                             level.c_str(), threads, blocks, opt.gpus,
                             skip.c_str());
                continue;
            }
            const std::string id = "sync-" + level + "-t" + std::to_string(threads)
                + "-b" + std::to_string(blocks) + "-g" + std::to_string(opt.gpus);
            writer.add_experiment({id, "repeatdiff", {
                {"instr", level + "_sync"},
                {"repeats_r1", std::to_string(opt.sync_r1)},
                {"repeats_r2", std::to_string(opt.sync_r2)},
                {"level", level},
                {"threads_per_block", std::to_string(threads)},
                {"blocks_per_sm", std::to_string(blocks)},
                {"gpu_count", std::to_string(opt.gpus)},
            }});
            for (int run = 0; run < opt.runs; ++run) {
                double high = 0.0, low = 0.0;
                std::string unused;
                backend.time_sync_point(level, blocks, threads, opt.gpus,
                                        opt.sync_r1, &high, &unused);
                backend.time_sync_point(level, blocks, threads, opt.gpus,
                                        opt.sync_r2, &low, &unused);
                writer.add_sample({id + "/k1", domain, run, high});
                writer.add_sample({id + "/k2", domain, run, low});
            }
            ++emitted;
        }
    }
    if (emitted == 0) {
        throw std::runtime_error("every sweep point was skipped");
    }
}

void run_warp_order_probe(Backend& backend, const Options&,
                          MeasurementWriter& writer) {
    const auto timers = backend.warp_order_probe();
    writer.add_experiment({"warp-order-pre", "timing",
                           {{"probe", "warp_order"}, {"phase", "pre"}}});
    writer.add_experiment({"warp-order-post", "timing",
                           {{"probe", "warp_order"}, {"phase", "post"}}});
    for (size_t tid = 0; tid < timers.size(); ++tid) {
        writer.add_sample({"warp-order-pre", "gpu_cycles",
                           static_cast<int>(tid),
                           static_cast<double>(timers[tid].first)});
        writer.add_sample({"warp-order-post", "gpu_cycles",
                           static_cast<int>(tid),
                           static_cast<double>(timers[tid].second)});
    }
}

void run_deadlock_probe(Backend& backend, const Options& opt,
                        MeasurementWriter& writer) {
    for (const char* granularity : kDeadlockCases) {
        const ProbeOutcome outcome =
            backend.deadlock_probe(granularity, opt.timeout_ms);
        const std::string id = std::string("deadlock-") + granularity;
        writer.add_experiment({id, "timing", {
            {"probe", "deadlock"},
            {"granularity", granularity},
            {"timeout_ms", std::to_string(opt.timeout_ms)},
            {"outcome", outcome.outcome},
        }});
        writer.add_sample({id, "cpu_ns", 0, outcome.elapsed_ns});
    }
}

int run_benchmark(int argc, char** argv) {
    Options opt = parse_options(argc, argv);

    if (!opt.deadlock_child.empty()) {
        // Child mode for the CUDA watchdog: run one case, may never return.
        return run_deadlock_case_blocking(opt.deadlock_child);
    }

    std::unique_ptr<Backend> backend;
    if (!opt.simulate) {
        backend = make_cuda_backend(opt.device_ordinal);
        if (!backend) {
            std::fprintf(stderr,
                         "note: CUDA unavailable, falling back to --simulate\n");
        }
    }
    if (!backend) {
        backend = make_sim_backend(opt.sim);
    }

    const std::string device = opt.device_name.empty() ? backend->device_name()
                                                       : opt.device_name;
    MeasurementWriter writer(device, backend->provenance());

    if (opt.benchmark == "launch_fusion") {
        run_launch_fusion(*backend, opt, writer);
    } else if (opt.benchmark == "instr_repeatdiff") {
        run_instr_repeatdiff(*backend, opt, writer);
    } else if (opt.benchmark == "warp_order_probe") {
        run_warp_order_probe(*backend, opt, writer);
    } else if (opt.benchmark == "deadlock_probe") {
        run_deadlock_probe(*backend, opt, writer);
    } else {
        run_sync_sweep(*backend, opt, writer);
    }

    if (!writer.write_file(opt.out)) {
        std::fprintf(stderr, "error: cannot write '%s'\n", opt.out.c_str());
        return 1;
    }
    std::printf("%s: wrote %s\n", opt.benchmark.c_str(), opt.out.c_str());
    return 0;
}

}  // namespace
}  // namespace syncbench

int main(int argc, char** argv) {
    try {
        return syncbench::run_benchmark(argc, argv);
    } catch (const std::exception& error) {
        std::fprintf(stderr, "error: %s\n", error.what());
        return 1;
    }
}
