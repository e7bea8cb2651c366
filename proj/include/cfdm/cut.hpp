#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfdm {

enum class Ownership { Server, Client };

// Timestep ownership under a cut-ratio. The server owns the high-noise steps
// t > t_split, executed first in the reverse chain; the client keeps the
// final t_split low-noise steps local. t_split = round-half-up(c * T).
struct CutConfig {
    int T = 0;
    double c = 0.0;
    int t_split = 0;

    CutConfig() = default;
    CutConfig(int total_steps, double cut_ratio) : T(total_steps), c(cut_ratio) {
        if (T < 1) throw std::invalid_argument("CutConfig: T must be >= 1");
        if (!(c >= 0.0 && c <= 1.0))
            throw std::invalid_argument("CutConfig: cut-ratio must lie in [0, 1]");
        t_split = static_cast<int>(std::floor(c * T + 0.5));
    }

    int server_steps() const { return T - t_split; }
    int client_steps() const { return t_split; }
};

inline Ownership ownership(int t, const CutConfig& cut) {
    if (t < 1 || t > cut.T)
        throw std::invalid_argument("ownership: timestep " + std::to_string(t) +
                                    " outside [1, " + std::to_string(cut.T) + "]");
    return t > cut.t_split ? Ownership::Server : Ownership::Client;
}

}  // namespace cfdm
