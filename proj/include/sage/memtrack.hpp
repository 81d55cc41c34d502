#pragma once

#include <atomic>
#include <cstddef>
#include <cstring>
#include <utility>

// Byte accounting for the numeric buffers on the sketch path. Every
// TrackedStorage registers its footprint with a process-wide counter, so
// tests and the bench tool can measure peak live numeric storage instead
// of trusting an analytic formula.

namespace sage::memtrack {

namespace detail {
std::atomic<std::size_t>& live_counter();
std::atomic<std::size_t>& peak_counter();
void add(std::size_t bytes);
void sub(std::size_t bytes);
}  // namespace detail

/// Currently live tracked bytes.
std::size_t live_bytes();

/// High-water mark since the last reset_peak().
std::size_t peak_bytes();

/// Set the high-water mark back to the current live count.
void reset_peak();

/// Fixed-size, zero-initialized array of doubles whose footprint is
/// registered with the global counters for its whole lifetime.
class TrackedStorage {
public:
    TrackedStorage() = default;

    explicit TrackedStorage(std::size_t n) : n_(n) {
        if (n_ > 0) {
            data_ = new double[n_]();
            detail::add(n_ * sizeof(double));
        }
    }

    TrackedStorage(const TrackedStorage& other) : n_(other.n_) {
        if (n_ > 0) {
            data_ = new double[n_];
            std::memcpy(data_, other.data_, n_ * sizeof(double));
            detail::add(n_ * sizeof(double));
        }
    }

    TrackedStorage(TrackedStorage&& other) noexcept
        : data_(other.data_), n_(other.n_) {
        other.data_ = nullptr;
        other.n_ = 0;
    }

    TrackedStorage& operator=(TrackedStorage other) noexcept {
        swap(other);
        return *this;
    }

    ~TrackedStorage() { release(); }

    void swap(TrackedStorage& other) noexcept {
        std::swap(data_, other.data_);
        std::swap(n_, other.n_);
    }

    double* data() { return data_; }
    const double* data() const { return data_; }
    std::size_t size() const { return n_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

private:
    void release() {
        if (data_ != nullptr) {
            delete[] data_;
            detail::sub(n_ * sizeof(double));
            data_ = nullptr;
            n_ = 0;
        }
    }

    double* data_ = nullptr;
    std::size_t n_ = 0;
};

}  // namespace sage::memtrack
