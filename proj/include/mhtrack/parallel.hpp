#ifndef MHTRACK_PARALLEL_HPP_
#define MHTRACK_PARALLEL_HPP_

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mhtrack
{
    /// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is handled
    /// by exactly one call, so results written to per-index slots do not depend on
    /// the worker count. The first exception thrown is rethrown after the join.
    template <typename Fn>
    void parallel_for(int n, int workers, Fn&& fn)
    {
        workers = std::clamp(workers, 1, std::max(n, 1));
        if (workers == 1)
        {
            for (int i = 0; i < n; ++i)
                fn(i);
            return;
        }
        std::exception_ptr error;
        std::mutex error_mutex;
        {
            std::vector<std::jthread> threads;
            threads.reserve(workers);
            for (int w = 0; w < workers; ++w)
                threads.emplace_back([&, w] {
                    for (int i = w; i < n; i += workers)
                    {
                        try
                        {
                            fn(i);
                        }
                        catch (...)
                        {
                            std::lock_guard lock(error_mutex);
                            if (!error)
                                error = std::current_exception();
                        }
                    }
                });
        }
        if (error)
            std::rethrow_exception(error);
    }
}

#endif
