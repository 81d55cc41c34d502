#include "sage/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "sage/errors.hpp"

namespace sage::kernels {

namespace detail {

const Ops& scalar_ops();
#if defined(SAGE_HAVE_AVX2)
const Ops& avx2_ops();
bool avx2_cpu_supported();
#endif
#if defined(SAGE_HAVE_NEON)
const Ops& neon_ops();
#endif

namespace {

Backend pick_default() {
    const char* env = std::getenv("SAGE_KERNELS");
    if (env != nullptr && std::string(env) != "auto") {
        const Backend forced = parse_backend(env);
        if (!backend_available(forced)) {
            throw ConfigError(std::string("SAGE_KERNELS requests unavailable "
                                          "backend: ") +
                              backend_name(forced));
        }
        return forced;
    }
#if defined(SAGE_HAVE_AVX2)
    if (avx2_cpu_supported()) {
        return Backend::avx2;
    }
#endif
#if defined(SAGE_HAVE_NEON)
    return Backend::neon;
#endif
    return Backend::scalar;
}

std::atomic<const Ops*>& active_slot() {
    static std::atomic<const Ops*> slot{nullptr};
    return slot;
}

std::atomic<Backend>& active_id() {
    static std::atomic<Backend> id{Backend::scalar};
    return id;
}

void install(Backend b) {
    active_id().store(b, std::memory_order_relaxed);
    active_slot().store(&ops(b), std::memory_order_release);
}

void ensure_initialized() {
    if (active_slot().load(std::memory_order_acquire) == nullptr) {
        install(pick_default());
    }
}

}  // namespace

const Ops& active_ops() {
    const Ops* table = active_slot().load(std::memory_order_acquire);
    if (table == nullptr) {
        ensure_initialized();
        table = active_slot().load(std::memory_order_acquire);
    }
    return *table;
}

}  // namespace detail

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar:
            return "scalar";
        case Backend::avx2:
            return "avx2";
        case Backend::neon:
            return "neon";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(SAGE_HAVE_AVX2)
            return detail::avx2_cpu_supported();
#else
            return false;
#endif
        case Backend::neon:
#if defined(SAGE_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
        if (backend_available(b)) {
            out.push_back(b);
        }
    }
    return out;
}

const Ops& ops(Backend b) {
    switch (b) {
        case Backend::scalar:
            return detail::scalar_ops();
        case Backend::avx2:
#if defined(SAGE_HAVE_AVX2)
            return detail::avx2_ops();
#else
            break;
#endif
        case Backend::neon:
#if defined(SAGE_HAVE_NEON)
            return detail::neon_ops();
#else
            break;
#endif
    }
    throw ConfigError(std::string("kernel backend not compiled in: ") +
                      backend_name(b));
}

Backend active_backend() {
    detail::ensure_initialized();
    return detail::active_id().load(std::memory_order_relaxed);
}

void force_backend(Backend b) {
    if (!backend_available(b)) {
        throw ConfigError(std::string("kernel backend unavailable: ") +
                          backend_name(b));
    }
    detail::install(b);
}

Backend parse_backend(const std::string& name) {
    if (name == "scalar") {
        return Backend::scalar;
    }
    if (name == "avx2") {
        return Backend::avx2;
    }
    if (name == "neon") {
        return Backend::neon;
    }
    if (name == "auto") {
        detail::ensure_initialized();
        return active_backend();
    }
    throw ConfigError("unknown kernel backend name: " + name);
}

}  // namespace sage::kernels
