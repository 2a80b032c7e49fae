#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace supr {

/// Geometric perturbation-size sequence eta_l = eta0 * kernel^l together with
/// the inner-loop counts N_k. A single-element inner_counts vector gives a
/// constant N_k; longer vectors repeat cyclically.
struct Schedule {
    double eta0 = 0.2;
    double kernel = 0.995;               // a, in (0,1)
    std::vector<int> inner_counts{10};   // N_k

    void validate() const {
        if (!(eta0 > 0.0)) throw std::invalid_argument("Schedule: eta0 must be positive");
        if (!(kernel > 0.0 && kernel < 1.0)) {
            throw std::invalid_argument("Schedule: kernel must lie in (0,1)");
        }
        if (inner_counts.empty()) throw std::invalid_argument("Schedule: inner counts empty");
        for (int n : inner_counts) {
            if (n < 1) throw std::invalid_argument("Schedule: inner counts must be >= 1");
        }
    }

    double eta(long long ell) const {
        return eta0 * std::pow(kernel, static_cast<double>(ell));
    }

    int inner_count(long long k) const {
        return inner_counts[static_cast<std::size_t>(k % static_cast<long long>(inner_counts.size()))];
    }

    int inner_count_bound() const {
        int n = 0;
        for (int c : inner_counts) n = std::max(n, c);
        return n;
    }

    /// Sum of the full eta series, eta0 / (1 - kernel).
    double summability_bound() const { return eta0 / (1.0 - kernel); }
};

/// Position in the eta sequence handed to a nonascent oracle. Oracles that
/// search over shrinking perturbation sizes advance it; the engine applies
/// the per-inner-step increment itself afterwards.
class ScheduleCursor {
public:
    ScheduleCursor(const Schedule& schedule, long long index)
        : schedule_(&schedule), index_(index) {}

    double eta() const { return schedule_->eta(index_); }
    long long index() const { return index_; }
    void advance() { ++index_; }
    const Schedule& schedule() const { return *schedule_; }

private:
    const Schedule* schedule_;
    long long index_;
};

}  // namespace supr
