#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfdm {

enum class ScheduleKind { Cosine, Linear };

inline const char* to_string(ScheduleKind k) {
    return k == ScheduleKind::Cosine ? "cosine" : "linear";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleKind::Cosine;
    if (s == "linear") return ScheduleKind::Linear;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

// Per-timestep noise coefficients for t = 1..T. Index 0 is the clean image:
// alpha_bar[0] == 1 and beta[0] is unused. alpha_bar is built by telescoping
// from the (possibly clipped) betas, so alpha_bar[t] == alpha_bar[t-1]*alpha[t]
// holds exactly in 64-bit arithmetic.
struct VarianceSchedule {
    int T = 0;
    ScheduleKind kind = ScheduleKind::Cosine;
    std::vector<double> beta;       // [0..T], beta[0] = 0
    std::vector<double> alpha;      // alpha[t] = 1 - beta[t]
    std::vector<double> alpha_bar;  // alpha_bar[t] = prod_{s<=t} alpha[s]

    double sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar[static_cast<std::size_t>(t)]); }
    double sqrt_one_minus_alpha_bar(int t) const {
        return std::sqrt(1.0 - alpha_bar[static_cast<std::size_t>(t)]);
    }

    void check_timestep(int t) const {
        if (t < 1 || t > T)
            throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                        std::to_string(T) + "]");
    }

    // Builds a schedule directly from betas; used by tests for degenerate T.
    static VarianceSchedule from_betas(ScheduleKind kind, const std::vector<double>& betas) {
        VarianceSchedule s;
        s.T = static_cast<int>(betas.size());
        s.kind = kind;
        s.beta.assign(1, 0.0);
        s.alpha.assign(1, 1.0);
        s.alpha_bar.assign(1, 1.0);
        for (double b : betas) {
            if (!(b > 0.0 && b < 1.0))
                throw std::invalid_argument("beta outside (0, 1)");
            s.beta.push_back(b);
            s.alpha.push_back(1.0 - b);
            s.alpha_bar.push_back(s.alpha_bar.back() * (1.0 - b));
        }
        return s;
    }
};

// Cosine: alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2),
// betas clipped to <= 0.999. Linear: beta ramps 1e-4 -> 0.02 (test fixture).
inline VarianceSchedule make_schedule(ScheduleKind kind, int T, double offset = 0.008) {
    if (T < 2) throw std::invalid_argument("make_schedule: T must be >= 2");
    std::vector<double> betas;
    betas.reserve(static_cast<std::size_t>(T));
    if (kind == ScheduleKind::Cosine) {
        if (offset < 0.0) throw std::invalid_argument("make_schedule: cosine offset must be >= 0");
        auto f = [&](double t) {
            const double x = ((t / T + offset) / (1.0 + offset)) * M_PI / 2.0;
            const double c = std::cos(x);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double ab = f(static_cast<double>(t)) / f0;
            double b = 1.0 - ab / prev;
            b = std::min(b, 0.999);
            betas.push_back(b);
            prev = ab;
        }
    } else {
        const double b0 = 1e-4, b1 = 0.02;
        for (int t = 1; t <= T; ++t)
            betas.push_back(T == 1 ? b1 : b0 + (b1 - b0) * (t - 1) / static_cast<double>(T - 1));
    }
    return VarianceSchedule::from_betas(kind, betas);
}

}  // namespace cfdm
