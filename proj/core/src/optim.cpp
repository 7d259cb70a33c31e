#include "gridflux/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridflux {

void optimizer_step(OptimizerState& state, const OptimizerConfig& config,
                    std::vector<double>& params, const std::vector<double>& grad,
                    double current_lr, const std::uint8_t* frozen) {
    const std::size_t n = params.size();
    if (grad.size() != n) throw DimensionError("optimizer_step: grad/param size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grad[i]))
            throw NonFiniteError("non-finite gradient at coordinate " + std::to_string(i));

    auto moving = [&](std::size_t i) { return frozen == nullptr || frozen[i] == 0; };

    switch (config.kind) {
        case OptimizerKind::Adam: {
            if (state.m.size() != n) state.m.assign(n, 0.0);
            if (state.v.size() != n) state.v.assign(n, 0.0);
            ++state.step_count;
            const double t = static_cast<double>(state.step_count);
            const double bc1 = 1.0 - std::pow(config.beta1, t);
            const double bc2 = 1.0 - std::pow(config.beta2, t);
            for (std::size_t i = 0; i < n; ++i) {
                if (!moving(i)) continue;
                state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
                state.v[i] =
                    config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                const double mhat = state.m[i] / bc1;
                const double vhat = state.v[i] / bc2;
                params[i] -= current_lr * mhat / (std::sqrt(vhat) + config.eps);
            }
            break;
        }
        case OptimizerKind::Sgd: {
            ++state.step_count;
            if (config.momentum != 0.0 && state.buf.size() != n) state.buf.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!moving(i)) continue;
                double step = grad[i];
                if (config.momentum != 0.0) {
                    state.buf[i] = config.momentum * state.buf[i] + grad[i];
                    step = state.buf[i];
                }
                params[i] -= current_lr * step;
            }
            break;
        }
        case OptimizerKind::RmsProp: {
            ++state.step_count;
            if (state.v.size() != n) state.v.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!moving(i)) continue;
                state.v[i] =
                    config.alpha * state.v[i] + (1.0 - config.alpha) * grad[i] * grad[i];
                params[i] -= current_lr * grad[i] / (std::sqrt(state.v[i]) + config.eps);
            }
            break;
        }
    }
}

double scheduler_step(SchedulerState& state, const SchedulerConfig& config,
                      double metric) {
    if (!state.initialized) {
        state.best = std::numeric_limits<double>::infinity();
        if (state.base_lr == 0.0) state.base_lr = state.current_lr;
        state.initialized = true;
    }
    ++state.t;
    switch (config.kind) {
        case SchedulerKind::Constant:
            break;
        case SchedulerKind::StepLr: {
            const auto k = state.t / config.step_size;
            state.current_lr =
                state.base_lr * std::pow(config.gamma, static_cast<double>(k));
            break;
        }
        case SchedulerKind::MultiStepLr: {
            std::int64_t hit = 0;
            for (int ms : config.milestones)
                if (ms <= state.t) ++hit;
            state.current_lr =
                state.base_lr * std::pow(config.gamma, static_cast<double>(hit));
            break;
        }
        case SchedulerKind::ReduceOnPlateau: {
            if (metric < state.best * (1.0 - config.threshold)) {
                state.best = metric;
                state.num_bad = 0;
            } else {
                ++state.num_bad;
            }
            if (state.cooldown_left > 0) {
                --state.cooldown_left;
                state.num_bad = 0;
            }
            if (state.num_bad > config.patience) {
                state.current_lr = std::max(state.current_lr * config.factor,
                                            config.min_lr);
                state.cooldown_left = config.cooldown;
                state.num_bad = 0;
            }
            break;
        }
    }
    return state.current_lr;
}

namespace {

Preset adam_preset(std::string name, double lr, double b1, double b2,
                   SchedulerConfig sched, int max_iter) {
    Preset p;
    p.name = std::move(name);
    p.optimizer.kind = OptimizerKind::Adam;
    p.optimizer.lr = lr;
    p.optimizer.beta1 = b1;
    p.optimizer.beta2 = b2;
    p.scheduler = std::move(sched);
    p.max_iter = max_iter;
    return p;
}

SchedulerConfig plateau(double factor, int patience, double threshold, int cooldown) {
    SchedulerConfig s;
    s.kind = SchedulerKind::ReduceOnPlateau;
    s.factor = factor;
    s.patience = patience;
    s.threshold = threshold;
    s.cooldown = cooldown;
    return s;
}

SchedulerConfig step_lr(int step_size, double gamma) {
    SchedulerConfig s;
    s.kind = SchedulerKind::StepLr;
    s.step_size = step_size;
    s.gamma = gamma;
    return s;
}

const Preset kPresets[] = {
    adam_preset("dpf-118", 0.0034, 0.979, 0.963, plateau(0.547, 41, 0.0673, 97), 1000),
    adam_preset("dpf-9241", 0.0001, 0.979, 0.963, plateau(0.547, 41, 0.0673, 97), 1000),
    adam_preset("ts-first", 0.03564, 0.9802, 0.9440, step_lr(100, 0.773), 1000),
    adam_preset("ts-warm", 0.00027, 0.7847, 0.6624, plateau(0.8, 2, 0.0388, 4), 300),
};

}  // namespace

std::optional<Preset> find_preset(const std::string& name) {
    for (const Preset& p : kPresets)
        if (p.name == name) return p;
    return std::nullopt;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const Preset& p : kPresets) out.push_back(p.name);
    return out;
}

}  // namespace gridflux
