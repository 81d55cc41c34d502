#include "sage/memtrack.hpp"

namespace sage::memtrack {

namespace detail {

std::atomic<std::size_t>& live_counter() {
    static std::atomic<std::size_t> live{0};
    return live;
}

std::atomic<std::size_t>& peak_counter() {
    static std::atomic<std::size_t> peak{0};
    return peak;
}

void add(std::size_t bytes) {
    const std::size_t now =
        live_counter().fetch_add(bytes, std::memory_order_relaxed) + bytes;
    auto& peak = peak_counter();
    std::size_t seen = peak.load(std::memory_order_relaxed);
    while (seen < now &&
           !peak.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
    }
}

void sub(std::size_t bytes) {
    live_counter().fetch_sub(bytes, std::memory_order_relaxed);
}

}  // namespace detail

std::size_t live_bytes() {
    return detail::live_counter().load(std::memory_order_relaxed);
}

std::size_t peak_bytes() {
    return detail::peak_counter().load(std::memory_order_relaxed);
}

void reset_peak() {
    detail::peak_counter().store(live_bytes(), std::memory_order_relaxed);
}

}  // namespace sage::memtrack
