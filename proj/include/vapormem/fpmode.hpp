// fpmode.hpp — Scoped flush-to-zero floating-point mode
//
// Decaying coherences drift through the denormal range and stall the FPU by
// two orders of magnitude. The integrators flush denormals to zero for the
// duration of a run; the guard restores the caller's mode on exit and the
// setting is per-thread, so parallel sweeps stay independent.

#pragma once

#if defined(__SSE2__) || defined(__x86_64__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#define VAPORMEM_HAS_FTZ 1
#endif

namespace vapormem {

class DenormalFlushGuard {
public:
    DenormalFlushGuard() {
#ifdef VAPORMEM_HAS_FTZ
        saved_ = _mm_getcsr();
        _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
        _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
    }
    ~DenormalFlushGuard() {
#ifdef VAPORMEM_HAS_FTZ
        _mm_setcsr(saved_);
#endif
    }
    DenormalFlushGuard(const DenormalFlushGuard&) = delete;
    DenormalFlushGuard& operator=(const DenormalFlushGuard&) = delete;

private:
#ifdef VAPORMEM_HAS_FTZ
    unsigned int saved_ = 0;
#endif
};

} // namespace vapormem
