// CUDA timing backend. CPU-clock methodology throughout: a monotonic host
// timer wraps launch + device synchronize, so instruction and barrier costs
// are extracted downstream by repeat differencing rather than read from
// device counters. Wait units use the sleep instruction on Volta and newer
// parts and calibrated clock64 spin loops on Pascal.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <cooperative_groups.h>
#include <cuda_runtime.h>

#include "backend.hpp"

namespace cg = cooperative_groups;

namespace syncbench {
namespace {

#define CUDA_CHECK(expr)                                                     \
    do {                                                                     \
        cudaError_t status0 = (expr);                                        \
        if (status0 != cudaSuccess) {                                        \
            throw std::runtime_error(std::string(#expr) + ": " +             \
                                     cudaGetErrorString(status0));           \
        }                                                                    \
    } while (0)

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point start, Clock::time_point stop) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start)
        .count();
}

// One wait unit is ~1000 ns: __nanosleep where available, otherwise a
// clock64 spin across `spin_cycles_per_unit` cycles.
__global__ void wait_kernel(int units, long long spin_cycles_per_unit) {
#if __CUDA_ARCH__ >= 700
    (void)spin_cycles_per_unit;
    for (int unit = 0; unit < units; ++unit) {
        __nanosleep(1000);
    }
#else
    for (int unit = 0; unit < units; ++unit) {
        const long long start = clock64();
        while (clock64() - start < spin_cycles_per_unit) {
        }
    }
#endif
}

template <int REPS>
__global__ void repeat_chain_kernel(float seed_p, float seed_q, float* sink) {
    float p = seed_p;
    float q = seed_q;
#pragma unroll
    for (int repeat = 0; repeat < REPS / 2; ++repeat) {
        p = p + q;  // dependent chain; 2 adds per iteration
        q = p + q;
    }
    if (threadIdx.x == 0 && blockIdx.x == 0) {
        *sink = q;
    }
}

__global__ void warp_sync_kernel(int repeats) {
    cg::thread_block_tile<32> tile =
        cg::tiled_partition<32>(cg::this_thread_block());
    for (int repeat = 0; repeat < repeats; ++repeat) {
        tile.sync();
    }
}

__global__ void block_sync_kernel(int repeats) {
    for (int repeat = 0; repeat < repeats; ++repeat) {
        __syncthreads();
    }
}

__global__ void grid_sync_kernel(int repeats) {
    cg::grid_group grid = cg::this_grid();
    for (int repeat = 0; repeat < repeats; ++repeat) {
        grid.sync();
    }
}

#if CUDART_VERSION < 12000
__global__ void multi_grid_sync_kernel(int repeats) {
    cg::multi_grid_group group = cg::this_multi_grid();
    for (int repeat = 0; repeat < repeats; ++repeat) {
        group.sync();
    }
}
#endif

#define WARP_ORDER_CASE(n)                                                   \
    else if (tid == (n)) {                                                   \
        pre[n] = clock64();                                                  \
        tile.sync();                                                         \
        post[n] = clock64();                                                 \
    }

// Divergent entry into the same barrier: one branch per thread.
__global__ void warp_order_probe_kernel(long long* pre, long long* post) {
    cg::thread_block_tile<32> tile =
        cg::tiled_partition<32>(cg::this_thread_block());
    const int tid = threadIdx.x;
    if (tid == 0) {
        pre[0] = clock64();
        tile.sync();
        post[0] = clock64();
    }
    WARP_ORDER_CASE(1) WARP_ORDER_CASE(2) WARP_ORDER_CASE(3)
    WARP_ORDER_CASE(4) WARP_ORDER_CASE(5) WARP_ORDER_CASE(6)
    WARP_ORDER_CASE(7) WARP_ORDER_CASE(8) WARP_ORDER_CASE(9)
    WARP_ORDER_CASE(10) WARP_ORDER_CASE(11) WARP_ORDER_CASE(12)
    WARP_ORDER_CASE(13) WARP_ORDER_CASE(14) WARP_ORDER_CASE(15)
    WARP_ORDER_CASE(16) WARP_ORDER_CASE(17) WARP_ORDER_CASE(18)
    WARP_ORDER_CASE(19) WARP_ORDER_CASE(20) WARP_ORDER_CASE(21)
    WARP_ORDER_CASE(22) WARP_ORDER_CASE(23) WARP_ORDER_CASE(24)
    WARP_ORDER_CASE(25) WARP_ORDER_CASE(26) WARP_ORDER_CASE(27)
    WARP_ORDER_CASE(28) WARP_ORDER_CASE(29) WARP_ORDER_CASE(30)
    else {
        pre[31] = clock64();
        tile.sync();
        post[31] = clock64();
    }
}

__global__ void warp_partial_sync_kernel() {
    cg::thread_block_tile<32> tile =
        cg::tiled_partition<32>(cg::this_thread_block());
    if (threadIdx.x < 16) {
        tile.sync();
    }
}

__global__ void block_partial_sync_kernel() {
    if (threadIdx.x < blockDim.x / 2) {
        __syncthreads();
    }
}

__global__ void grid_partial_sync_kernel() {
    cg::grid_group grid = cg::this_grid();
    if (blockIdx.x == 0) {
        grid.sync();
    }
}

class CudaBackend final : public Backend {
  public:
    explicit CudaBackend(int device_ordinal) : ordinal_(device_ordinal) {
        CUDA_CHECK(cudaSetDevice(ordinal_));
        CUDA_CHECK(cudaGetDeviceProperties(&props_, ordinal_));
        // clockRate is in kHz: cycles per 1000 ns wait unit.
        spin_cycles_per_unit_ = props_.clockRate / 1000;
        CUDA_CHECK(cudaMalloc(&sink_, sizeof(float)));
        CUDA_CHECK(cudaMalloc(&pre_, 32 * sizeof(long long)));
        CUDA_CHECK(cudaMalloc(&post_, 32 * sizeof(long long)));
    }

    ~CudaBackend() override {
        cudaFree(sink_);
        cudaFree(pre_);
        cudaFree(post_);
    }

    std::string device_name() const override { return props_.name; }
    std::string provenance() const override { return "hardware"; }
    std::string kernel_clock_domain() const override { return "cpu_ns"; }

    bool fusion_supported(std::string* reason) const override {
        if (props_.major < 7 && reason) {
            *reason = "no sleep instruction before Volta; wait units use "
                      "calibrated spin loops (reduced fusion accuracy)";
        }
        return true;
    }

    double time_fusion_arm(int launches, int wait_units, bool warmup) override {
        if (warmup && !warmed_) {
            wait_kernel<<<1, 1>>>(1, spin_cycles_per_unit_);
            CUDA_CHECK(cudaDeviceSynchronize());
            warmed_ = true;
        }
        const auto start = Clock::now();
        for (int launch = 0; launch < launches; ++launch) {
            wait_kernel<<<1, 1>>>(wait_units, spin_cycles_per_unit_);
        }
        CUDA_CHECK(cudaDeviceSynchronize());
        CUDA_CHECK(cudaGetLastError());
        return elapsed_ns(start, Clock::now());
    }

    double time_repeat_chain(const std::string& instr, int repeats) override {
        if (instr != "fadd") {
            throw std::runtime_error("unknown instruction label: " + instr);
        }
        ensure_warm();
        const auto start = Clock::now();
        launch_repeat_chain(repeats);
        CUDA_CHECK(cudaDeviceSynchronize());
        CUDA_CHECK(cudaGetLastError());
        return elapsed_ns(start, Clock::now());
    }

    bool time_sync_point(const std::string& level, int blocks_per_sm,
                         int threads_per_block, int gpu_count, int repeats,
                         double* out_value, std::string* skip_reason) override {
        ensure_warm();
        if (level == "warp" || level == "block") {
            void (*kernel)(int) =
                level == "warp" ? warp_sync_kernel : block_sync_kernel;
            const dim3 grid_dim(blocks_per_sm * props_.multiProcessorCount);
            const auto start = Clock::now();
            kernel<<<grid_dim, threads_per_block>>>(repeats);
            CUDA_CHECK(cudaDeviceSynchronize());
            CUDA_CHECK(cudaGetLastError());
            *out_value = elapsed_ns(start, Clock::now());
            return true;
        }
        if (level == "grid") {
            return time_grid_sync(blocks_per_sm, threads_per_block, repeats,
                                  out_value, skip_reason);
        }
        return time_multi_grid_sync(blocks_per_sm, threads_per_block,
                                    gpu_count, repeats, out_value, skip_reason);
    }

    std::vector<std::pair<std::int64_t, std::int64_t>> warp_order_probe() override {
        ensure_warm();
        warp_order_probe_kernel<<<1, 32>>>(pre_, post_);
        CUDA_CHECK(cudaDeviceSynchronize());
        CUDA_CHECK(cudaGetLastError());
        long long pre_host[32];
        long long post_host[32];
        CUDA_CHECK(cudaMemcpy(pre_host, pre_, sizeof(pre_host),
                              cudaMemcpyDeviceToHost));
        CUDA_CHECK(cudaMemcpy(post_host, post_, sizeof(post_host),
                              cudaMemcpyDeviceToHost));
        std::vector<std::pair<std::int64_t, std::int64_t>> timers;
        timers.reserve(32);
        for (int tid = 0; tid < 32; ++tid) {
            timers.emplace_back(pre_host[tid], post_host[tid]);
        }
        return timers;
    }

    ProbeOutcome deadlock_probe(const std::string& granularity,
                                int timeout_ms) override {
        // A deadlocked kernel cannot be recovered in-process, so each case
        // runs in a child process under a kill-on-timeout watchdog.
        char self[4096];
        const ssize_t length = readlink("/proc/self/exe", self, sizeof(self) - 1);
        if (length <= 0) {
            throw std::runtime_error("cannot resolve own executable path");
        }
        self[length] = '\0';

        const auto start = Clock::now();
        const pid_t child = fork();
        if (child < 0) {
            throw std::runtime_error("fork failed");
        }
        if (child == 0) {
            execl(self, self, "deadlock_probe", "--deadlock-child",
                  granularity.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        const auto deadline = start + std::chrono::milliseconds(timeout_ms);
        int status = 0;
        for (;;) {
            const pid_t done = waitpid(child, &status, WNOHANG);
            if (done == child) {
                return {"completed", elapsed_ns(start, Clock::now())};
            }
            if (Clock::now() >= deadline) {
                kill(child, SIGKILL);
                waitpid(child, &status, 0);
                return {"timeout", timeout_ms * 1.0e6};
            }
            usleep(1000);
        }
    }

    int run_deadlock_case(const std::string& granularity) {
        if (granularity == "warp_partial") {
            warp_partial_sync_kernel<<<1, 32>>>();
        } else if (granularity == "block_partial") {
            block_partial_sync_kernel<<<1, 64>>>();
        } else if (granularity == "grid_partial_block") {
            const dim3 grid_dim(2);
            const dim3 block_dim(32);
            CUDA_CHECK(cudaLaunchCooperativeKernel(
                reinterpret_cast<const void*>(grid_partial_sync_kernel),
                grid_dim, block_dim, nullptr, 0, nullptr));
        } else if (granularity == "multi_grid_partial_block" ||
                   granularity == "multi_grid_partial_gpu") {
#if CUDART_VERSION < 12000
            return run_multi_grid_deadlock_case(granularity);
#else
            std::fprintf(stderr,
                         "note: multi-device cooperative launch removed in "
                         "CUDA 12; case unsupported\n");
            return 3;
#endif
        } else {
            throw std::runtime_error("unknown deadlock case: " + granularity);
        }
        CUDA_CHECK(cudaDeviceSynchronize());
        return 0;
    }

  private:
    void ensure_warm() {
        if (!warmed_) {
            wait_kernel<<<1, 1>>>(1, spin_cycles_per_unit_);
            CUDA_CHECK(cudaDeviceSynchronize());
            warmed_ = true;
        }
    }

    void launch_repeat_chain(int repeats) {
        switch (repeats) {
            case 32: repeat_chain_kernel<32><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 64: repeat_chain_kernel<64><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 128: repeat_chain_kernel<128><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 256: repeat_chain_kernel<256><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 512: repeat_chain_kernel<512><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 1024: repeat_chain_kernel<1024><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 2048: repeat_chain_kernel<2048><<<1, 1>>>(1.f, 1.f, sink_); break;
            case 4096: repeat_chain_kernel<4096><<<1, 1>>>(1.f, 1.f, sink_); break;
            default:
                throw std::runtime_error(
                    "repeat count must be a power of two in [32, 4096]");
        }
    }

    bool occupancy_allows(const void* kernel, int blocks_per_sm,
                          int threads_per_block, std::string* skip_reason) {
        int max_blocks = 0;
        CUDA_CHECK(cudaOccupancyMaxActiveBlocksPerMultiprocessor(
            &max_blocks, kernel, threads_per_block, 0));
        if (blocks_per_sm > max_blocks) {
            if (skip_reason) {
                *skip_reason = "occupancy violation for cooperative launch "
                               "(max " + std::to_string(max_blocks) +
                               " blocks/SM at this block size)";
            }
            return false;
        }
        return true;
    }

    bool time_grid_sync(int blocks_per_sm, int threads_per_block, int repeats,
                        double* out_value, std::string* skip_reason) {
        if (!props_.cooperativeLaunch) {
            if (skip_reason) *skip_reason = "device lacks cooperative launch";
            return false;
        }
        const void* kernel = reinterpret_cast<const void*>(grid_sync_kernel);
        if (!occupancy_allows(kernel, blocks_per_sm, threads_per_block,
                              skip_reason)) {
            return false;
        }
        const dim3 grid_dim(blocks_per_sm * props_.multiProcessorCount);
        const dim3 block_dim(threads_per_block);
        int repeats_arg = repeats;
        void* args[] = {&repeats_arg};
        const auto start = Clock::now();
        CUDA_CHECK(cudaLaunchCooperativeKernel(kernel, grid_dim, block_dim,
                                               args, 0, nullptr));
        CUDA_CHECK(cudaDeviceSynchronize());
        *out_value = elapsed_ns(start, Clock::now());
        return true;
    }

    bool time_multi_grid_sync(int blocks_per_sm, int threads_per_block,
                              int gpu_count, int repeats, double* out_value,
                              std::string* skip_reason) {
#if CUDART_VERSION < 12000
        int devices = 0;
        CUDA_CHECK(cudaGetDeviceCount(&devices));
        if (gpu_count > devices) {
            if (skip_reason) {
                *skip_reason = "only " + std::to_string(devices) +
                               " device(s) present";
            }
            return false;
        }
        const void* kernel = reinterpret_cast<const void*>(multi_grid_sync_kernel);
        if (!occupancy_allows(kernel, blocks_per_sm, threads_per_block,
                              skip_reason)) {
            return false;
        }
        std::vector<cudaLaunchParams> params(gpu_count);
        std::vector<cudaStream_t> streams(gpu_count);
        const dim3 grid_dim(blocks_per_sm * props_.multiProcessorCount);
        const dim3 block_dim(threads_per_block);
        int repeats_arg = repeats;
        void* args[] = {&repeats_arg};
        for (int device = 0; device < gpu_count; ++device) {
            CUDA_CHECK(cudaSetDevice(device));
            CUDA_CHECK(cudaStreamCreate(&streams[device]));
            params[device].func = const_cast<void*>(kernel);
            params[device].gridDim = grid_dim;
            params[device].blockDim = block_dim;
            params[device].args = args;
            params[device].sharedMem = 0;
            params[device].stream = streams[device];
        }
        const auto start = Clock::now();
        CUDA_CHECK(cudaLaunchCooperativeKernelMultiDevice(
            params.data(), gpu_count, 0));
        for (int device = 0; device < gpu_count; ++device) {
            CUDA_CHECK(cudaSetDevice(device));
            CUDA_CHECK(cudaStreamSynchronize(streams[device]));
        }
        *out_value = elapsed_ns(start, Clock::now());
        for (int device = 0; device < gpu_count; ++device) {
            CUDA_CHECK(cudaSetDevice(device));
            CUDA_CHECK(cudaStreamDestroy(streams[device]));
        }
        CUDA_CHECK(cudaSetDevice(ordinal_));
        return true;
#else
        (void)blocks_per_sm;
        (void)threads_per_block;
        (void)gpu_count;
        (void)repeats;
        (void)out_value;
        if (skip_reason) {
            *skip_reason = "multi-device cooperative launch removed in CUDA 12";
        }
        return false;
#endif
    }

#if CUDART_VERSION < 12000
    int run_multi_grid_deadlock_case(const std::string& granularity) {
        // TODO: partial multi-grid cases need a second launch configuration
        // where one grid (or one GPU) skips the barrier; single-device
        // fallback exercises the grid-scope deadlock instead.
        (void)granularity;
        CUDA_CHECK(cudaLaunchCooperativeKernel(
            reinterpret_cast<const void*>(grid_partial_sync_kernel), dim3(2),
            dim3(32), nullptr, 0, nullptr));
        CUDA_CHECK(cudaDeviceSynchronize());
        return 0;
    }
#endif

    int ordinal_ = 0;
    cudaDeviceProp props_{};
    long long spin_cycles_per_unit_ = 0;
    bool warmed_ = false;
    float* sink_ = nullptr;
    long long* pre_ = nullptr;
    long long* post_ = nullptr;
};

CudaBackend* active_backend = nullptr;

}  // namespace

std::unique_ptr<Backend> make_cuda_backend(int device_ordinal) {
    int devices = 0;
    if (cudaGetDeviceCount(&devices) != cudaSuccess || devices == 0) {
        return nullptr;
    }
    auto backend = std::make_unique<CudaBackend>(device_ordinal);
    active_backend = backend.get();
    return backend;
}

int run_deadlock_case_blocking(const std::string& granularity) {
    if (active_backend == nullptr) {
        auto backend = make_cuda_backend(0);
        if (!backend) {
            return 2;
        }
        int status = static_cast<CudaBackend*>(backend.get())
                         ->run_deadlock_case(granularity);
        return status;
    }
    return active_backend->run_deadlock_case(granularity);
}

}  // namespace syncbench
