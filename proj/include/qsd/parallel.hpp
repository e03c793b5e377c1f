#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qsd {

inline int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

/// Persistent worker pool. The particle engines call into this once per time
/// step, so dispatch has to cost microseconds, not a thread spawn: workers
/// spin briefly on a generation counter before falling back to a condition
/// variable, chunks are claimed from an atomic cursor, and the calling thread
/// works alongside the pool.
class WorkerPool {
public:
    static WorkerPool& global() {
        static WorkerPool pool(static_cast<std::size_t>(default_workers() > 0 ? default_workers() - 1 : 0));
        return pool;
    }

    explicit WorkerPool(std::size_t helpers) {
        threads_.reserve(helpers);
        for (std::size_t i = 0; i < helpers; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
            generation_.fetch_add(1, std::memory_order_release);
        }
        wake_.notify_all();
        for (auto& t : threads_) t.join();
    }

    std::size_t helpers() const { return threads_.size(); }

    /// Runs invoke(ctx, begin, end) over chunk index ranges covering [0, n).
    void run(void (*invoke)(void*, std::size_t, std::size_t), void* ctx, std::size_t n,
             std::size_t chunk_count, std::size_t chunk_size) {
        invoke_ = invoke;
        ctx_ = ctx;
        n_ = n;
        chunk_size_ = chunk_size;
        chunk_cursor_.store(0, std::memory_order_relaxed);
        chunks_total_ = chunk_count;
        chunks_done_.store(0, std::memory_order_relaxed);
        error_set_.store(false, std::memory_order_relaxed);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            generation_.fetch_add(1, std::memory_order_release);
        }
        wake_.notify_all();
        work_chunks();
        while (chunks_done_.load(std::memory_order_acquire) < chunks_total_) {
            cpu_relax();
        }
        if (error_set_.load(std::memory_order_acquire)) {
            std::rethrow_exception(error_);
        }
    }

private:
    static void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#else
        std::this_thread::yield();
#endif
    }

    void work_chunks() {
        for (;;) {
            const std::size_t c = chunk_cursor_.fetch_add(1, std::memory_order_relaxed);
            if (c >= chunks_total_) break;
            const std::size_t begin = c * chunk_size_;
            const std::size_t end = std::min(n_, begin + chunk_size_);
            try {
                if (begin < end) invoke_(ctx_, begin, end);
            } catch (...) {
                bool expected = false;
                if (error_set_.compare_exchange_strong(expected, true)) {
                    error_ = std::current_exception();
                }
            }
            chunks_done_.fetch_add(1, std::memory_order_release);
        }
    }

    void worker_loop() {
        std::uint64_t seen = generation_.load(std::memory_order_acquire);
        for (;;) {
            // spin briefly, then sleep until the next generation
            for (int spin = 0; spin < 8192; ++spin) {
                if (generation_.load(std::memory_order_acquire) != seen) break;
                cpu_relax();
            }
            if (generation_.load(std::memory_order_acquire) == seen) {
                std::unique_lock<std::mutex> lock(mutex_);
                wake_.wait(lock, [&] { return generation_.load(std::memory_order_acquire) != seen; });
            }
            seen = generation_.load(std::memory_order_acquire);
            if (stop_) return;
            work_chunks();
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::atomic<std::uint64_t> generation_{0};
    bool stop_ = false;

    void (*invoke_)(void*, std::size_t, std::size_t) = nullptr;
    void* ctx_ = nullptr;
    std::size_t n_ = 0;
    std::size_t chunk_size_ = 0;
    std::size_t chunks_total_ = 0;
    std::atomic<std::size_t> chunk_cursor_{0};
    std::atomic<std::size_t> chunks_done_{0};
    std::atomic<bool> error_set_{false};
    std::exception_ptr error_;
};

}  // namespace detail

/// Runs fn(begin, end) over a partition of [0, n), using up to `workers`
/// concurrent executors. Partitioning never affects results: callers write to
/// disjoint slots, so any schedule produces identical output. Worker
/// exceptions are rethrown on the calling thread.
template <class Fn>
void parallel_for(int workers, std::size_t n, Fn&& fn) {
    if (n == 0) return;
    auto& pool = detail::WorkerPool::global();
    const std::size_t max_conc = 1 + pool.helpers();
    const std::size_t conc =
        std::min<std::size_t>(std::max(workers, 1), std::min(max_conc, n));
    if (conc <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk_size = (n + conc - 1) / conc;
    const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
    using F = std::decay_t<Fn>;
    const auto invoke = [](void* ctx, std::size_t b, std::size_t e) {
        (*static_cast<F*>(ctx))(b, e);
    };
    pool.run(invoke, const_cast<void*>(static_cast<const void*>(&fn)), n, chunks, chunk_size);
}

}  // namespace qsd
