#include "truffle/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace truffle::model {

namespace {

void require_non_negative(Millis value, const char* name) {
    if (value < 0) {
        throw std::domain_error(std::string("negative duration for ") + name);
    }
}

}  // namespace

void PhaseBreakdown::validate() const {
    require_non_negative(alpha_ms, "alpha_ms");
    require_non_negative(upsilon_ms, "upsilon_ms");
    require_non_negative(eta_ms, "eta_ms");
    require_non_negative(delta_ms, "delta_ms");
    require_non_negative(gamma_ms, "gamma_ms");
}

Millis cold_start(Millis upsilon_ms, Millis eta_ms) {
    require_non_negative(upsilon_ms, "upsilon_ms");
    require_non_negative(eta_ms, "eta_ms");
    return upsilon_ms + eta_ms;
}

Millis overlap_phase(Millis beta_ms, Millis delta_ms) {
    require_non_negative(beta_ms, "beta_ms");
    require_non_negative(delta_ms, "delta_ms");
    return std::max(beta_ms, delta_ms);
}

Millis end_to_end(const PhaseBreakdown& phases, bool overlapped) {
    phases.validate();
    const Millis beta = phases.beta_ms();
    if (overlapped) {
        return phases.alpha_ms + overlap_phase(beta, phases.delta_ms) + phases.gamma_ms;
    }
    return phases.alpha_ms + beta + phases.delta_ms + phases.gamma_ms;
}

Millis improvement(Millis beta_ms, Millis delta_ms) {
    require_non_negative(beta_ms, "beta_ms");
    require_non_negative(delta_ms, "delta_ms");
    return beta_ms + delta_ms - overlap_phase(beta_ms, delta_ms);
}

Millis workflow_objective(std::span<const PhaseBreakdown> stages) {
    Millis total = 0;
    for (const PhaseBreakdown& stage : stages) {
        total += end_to_end(stage, /*overlapped=*/true);
    }
    return total;
}

ImprovementReport analyze(const PhaseBreakdown& phases) {
    phases.validate();
    ImprovementReport report;
    report.phi_ms = overlap_phase(phases.beta_ms(), phases.delta_ms);
    report.delta_improvement_ms = improvement(phases.beta_ms(), phases.delta_ms);
    report.tau_sequential_ms = end_to_end(phases, /*overlapped=*/false);
    report.tau_overlapped_ms = end_to_end(phases, /*overlapped=*/true);
    return report;
}

}  // namespace truffle::model
