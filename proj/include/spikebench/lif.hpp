#ifndef SPIKEBENCH_LIF_HPP
#define SPIKEBENCH_LIF_HPP

#include <cmath>
#include <stdexcept>

namespace spikebench {

// Membrane decay constant and firing threshold of a discrete-time LIF
// neuron:  u_t = beta*u_{t-1} + I_t - v_th*s_{t-1},  s_t = Theta(u_t - v_th).
struct LifParams {
    double beta = 0.5;
    double v_th = 1.0;

    void validate() const
    {
        if (!(beta >= 0.0 && beta < 1.0))
            throw std::invalid_argument("LifParams: beta must lie in [0,1)");
        if (!(v_th > 0.0))
            throw std::invalid_argument("LifParams: v_th must be > 0");
    }
};

struct LifState {
    double u = 0.0;
    bool s_prev = false;
};

struct LifStepResult {
    LifState state;
    bool spike = false;
};

// One soft-reset LIF step. The previous spike subtracts exactly v_th;
// the threshold comparison fires at equality (Theta(0) = 1), which makes
// the beta=0, I=v_th case deterministic.
inline LifStepResult lif_step(const LifState& state, double input_current,
                              const LifParams& params)
{
    params.validate();
    if (!std::isfinite(input_current))
        throw std::invalid_argument("lif_step: input current must be finite");

    const double u = params.beta * state.u + input_current
                     - params.v_th * (state.s_prev ? 1.0 : 0.0);
    const bool spike = u >= params.v_th;
    return {LifState{u, spike}, spike};
}

} // namespace spikebench

#endif
