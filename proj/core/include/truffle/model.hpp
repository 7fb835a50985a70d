#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace truffle::model {

/// All durations are non-negative integral milliseconds.  Negative inputs are
/// programming errors, not data-path failures, so they throw std::domain_error.
using Millis = std::int64_t;

/// Additive phases of a single function invocation:
///   alpha  scheduling decision latency
///   upsilon  creation/boot of the sandbox
///   eta    application-level initialization
///   delta  input transfer latency
///   gamma  execution time of the function body
struct PhaseBreakdown {
    Millis alpha_ms = 0;
    Millis upsilon_ms = 0;
    Millis eta_ms = 0;
    Millis delta_ms = 0;
    Millis gamma_ms = 0;

    /// Startup latency: sandbox creation plus app initialization.
    Millis beta_ms() const { return upsilon_ms + eta_ms; }

    /// Throws std::domain_error if any phase is negative.
    void validate() const;
};

/// Startup latency beta = upsilon + eta.
Millis cold_start(Millis upsilon_ms, Millis eta_ms);

/// Duration of the combined startup/transfer phase when the input transfer
/// runs concurrently with the cold start: max(beta, delta).
Millis overlap_phase(Millis beta_ms, Millis delta_ms);

/// End-to-end invocation latency.  Sequential pipelines pay
/// alpha + beta + delta + gamma; overlapped ones alpha + max(beta, delta) + gamma.
Millis end_to_end(const PhaseBreakdown& phases, bool overlapped);

/// Latency removed by overlapping transfer with startup:
/// (beta + delta) - max(beta, delta), i.e. min(beta, delta).
Millis improvement(Millis beta_ms, Millis delta_ms);

/// Total latency of a workflow whose stages all overlap transfer with
/// startup: sum of alpha_i + max(beta_i, delta_i) + gamma_i.
Millis workflow_objective(std::span<const PhaseBreakdown> stages);

/// Everything the model says about one invocation, in one place.
struct ImprovementReport {
    Millis phi_ms = 0;                ///< overlap_phase(beta, delta)
    Millis delta_improvement_ms = 0;  ///< improvement(beta, delta)
    Millis tau_sequential_ms = 0;     ///< end_to_end, sequential
    Millis tau_overlapped_ms = 0;     ///< end_to_end, overlapped
};

ImprovementReport analyze(const PhaseBreakdown& phases);

}  // namespace truffle::model
