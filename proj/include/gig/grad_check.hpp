#pragma once

// Central-difference gradient verification. The checker is deliberately
// independent of the tape: it only perturbs raw parameter values and
// re-evaluates the loss closure, so it can contradict the autodiff path.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gig/tensor.hpp"

namespace gig {

struct GradCheckEntry {
    std::string name;
    std::size_t checked = 0;
    double max_rel_err = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> tensors;
    double max_rel_err = 0.0;
    bool passed = true;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

// For every scalar element of every parameter tensor, compares the autodiff
// gradient of make_loss() against (f(t+h) - f(t-h)) / 2h with
// h = h_scale * max(1, |t|). make_loss must be deterministic in the
// parameters; it is evaluated once under a tape and twice per element
// without one.
inline GradCheckReport grad_check(const std::function<Tensor()>& make_loss,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double h_scale = 1e-5, double tol = 1e-4) {
    if (h_scale <= 0.0) throw std::invalid_argument("grad_check: step scale must be positive");
    for (const auto& [name, p] : params) p.impl()->grad.clear();

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = make_loss();
        tape.backward(loss);
    }
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
        analytic.push_back(p.grad().empty() ? std::vector<double>(p.size(), 0.0) : p.grad());
        p.impl()->grad.clear();
    }

    GradCheckReport report;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor param = params[t].second;
        GradCheckEntry entry;
        entry.name = params[t].first;
        entry.checked = param.size();
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double theta = param.raw_values()[i];
            const double h = h_scale * std::max(1.0, std::abs(theta));
            param.raw_values()[i] = theta + h;
            const double up = make_loss().item();
            param.raw_values()[i] = theta - h;
            const double down = make_loss().item();
            param.raw_values()[i] = theta;
            const double numeric = (up - down) / (2.0 * h);
            entry.max_rel_err = std::max(entry.max_rel_err, relative_error(analytic[t][i], numeric));
        }
        entry.passed = entry.max_rel_err <= tol;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.passed = report.passed && entry.passed;
        report.tensors.push_back(std::move(entry));
    }
    return report;
}

} // namespace gig
