#pragma once

#include <chrono>
#include <thread>

namespace truffle::sim {

/// Scales every injected delay in the simulation by one global factor so the
/// same configuration runs at full fidelity (1.0) or compressed for fast
/// tests.  Only injected sleeps scale; real elapsed time is always measured
/// with an unscaled steady clock.
class SimClock {
public:
    explicit SimClock(double scale = 1.0) : scale_(scale < 0.0 ? 0.0 : scale) {}

    double scale() const { return scale_; }

    /// Sleep for nominal_ms scaled milliseconds.
    void sleep_nominal(double nominal_ms) const {
        if (nominal_ms <= 0.0 || scale_ <= 0.0) {
            return;
        }
        const auto scaled =
            std::chrono::duration<double, std::milli>(nominal_ms * scale_);
        std::this_thread::sleep_for(scaled);
    }

private:
    double scale_;
};

}  // namespace truffle::sim
