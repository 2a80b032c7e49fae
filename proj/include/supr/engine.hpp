#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "supr/image.hpp"
#include "supr/schedule.hpp"

namespace supr {

/// Feasibility-seeking side of the problem: the basic algorithmic operator,
/// the proximity function it is judged by, and the stopping level.
struct FeasibilityProblem {
    std::function<ImageVector(const ImageVector&)> feasibility_operator;
    std::function<double(const ImageVector&)> proximity;
    double epsilon = 1.0;
};

/// One perturbation produced by a nonascent oracle. `next` is the perturbed
/// iterate composed by the oracle's own arithmetic — the exact vector its
/// acceptance gate evaluated — so strict checks can re-verify the nonascent
/// property with zero tolerance. `delta_used` is eta at the schedule index
/// the step was accepted at.
struct OracleStep {
    ImageVector displacement;
    ImageVector next;
    double delta_used = 0.0;
    bool flagged = false;
};

/// Nonascent oracle contract: direction(y, cursor) must return a step with
/// ||displacement|| <= cursor-eta at return and target(next) <= target(y).
/// The zero step is always admissible.
struct NonascentOracle {
    std::function<double(const ImageVector&)> target;
    std::function<OracleStep(const ImageVector&, ScheduleCursor&)> direction;
};

struct IterationRecord {
    long long k = 0;
    double proximity = 0.0;       // at entry, Prox(y^k)
    double phi = 0.0;             // at entry, phi(y^k)
    long long ell_entry = 0;      // schedule index when iteration k started
    std::vector<double> inner_norms;
    double beta_k = 0.0;          // max of inner norms
    double aggregate_norm = 0.0;  // ||v^k|| of the normalized aggregate
    double time_s = 0.0;          // cumulative wall time at end of iteration k
};

enum class StopReason { EpsilonOutput, IterationLimit };

struct RunTrace {
    std::vector<IterationRecord> iterations;
    ImageVector output;
    StopReason stop_reason = StopReason::IterationLimit;
    long long outer_count = 0;       // K, number of completed outer iterations
    double final_proximity = 0.0;    // Prox(y^K)
    double final_phi = 0.0;          // phi(y^K)
    bool oracle_flagged = false;     // an oracle reported eta underflow
    double total_time_s = 0.0;
};

struct EngineOptions {
    long long max_iter = 5000;
    bool strict_checks = true;   // re-verify oracle contract on every inner step
};

namespace detail {
// Re-evaluating a norm or target at a different call site can round an
// ulp differently than the oracle's own arithmetic (the optimizer may
// vectorize one instantiation and not the other), so exact contract
// comparisons carry this reproducibility slack. Genuine violations are
// orders of magnitude larger.
inline constexpr double kCheckSlack = 1e-12;
}  // namespace detail

/// Thrown in strict-check mode when an oracle step leaves the nonascending
/// delta-ball; identifies the outer iteration and inner step.
class ContractViolation : public std::runtime_error {
public:
    ContractViolation(long long k, int n, const std::string& what_)
        : std::runtime_error("oracle contract violated at k=" + std::to_string(k) +
                             ", n=" + std::to_string(n) + ": " + what_),
          k(k), n(n) {}
    long long k;
    int n;
};

/// Superiorized version of the basic algorithm. Interlaces N_k nonascent
/// perturbations from the oracle with one application of the feasibility
/// operator per outer iteration, advancing the schedule index by one per
/// inner step. Stops at the epsilon-output (proximity(y^k) <= epsilon,
/// checked at the top of each outer loop) or after max_iter iterations.
inline RunTrace superiorize(const FeasibilityProblem& problem, const NonascentOracle& oracle,
                            const Schedule& schedule, const ImageVector& start,
                            const EngineOptions& options = {}) {
    if (options.max_iter < 1) throw std::invalid_argument("superiorize: max_iter must be >= 1");
    schedule.validate();

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    RunTrace trace;
    ImageVector y = start;
    long long ell = 0;
    long long k = 0;

    for (;;) {
        const double prox = problem.proximity(y);
        if (prox <= problem.epsilon) {
            trace.stop_reason = StopReason::EpsilonOutput;
            trace.final_proximity = prox;
            break;
        }
        if (k >= options.max_iter) {
            trace.stop_reason = StopReason::IterationLimit;
            trace.final_proximity = prox;
            break;
        }

        IterationRecord rec;
        rec.k = k;
        rec.proximity = prox;
        rec.phi = oracle.target(y);
        rec.ell_entry = ell;

        const int nk = schedule.inner_count(k);
        rec.inner_norms.reserve(nk);

        ImageVector inner = y;
        ImageVector aggregate(y.grid());
        double phi_chain = rec.phi;  // phi(y^{k,n}) along the inner chain

        for (int n = 0; n < nk; ++n) {
            ScheduleCursor cursor(schedule, ell);
            const double eta_entry = cursor.eta();
            OracleStep step = oracle.direction(inner, cursor);

            const double norm = step.displacement.norm();
            if (options.strict_checks) {
                if (!(step.delta_used <= eta_entry * (1.0 + detail::kCheckSlack))) {
                    throw ContractViolation(k, n, "delta_used " + std::to_string(step.delta_used) +
                                                      " exceeds eta at entry " +
                                                      std::to_string(eta_entry));
                }
                if (norm > step.delta_used * (1.0 + detail::kCheckSlack)) {
                    throw ContractViolation(k, n, "||d|| = " + std::to_string(norm) +
                                                      " exceeds delta = " +
                                                      std::to_string(step.delta_used));
                }
                const double phi_next = oracle.target(step.next);
                if (phi_next > phi_chain + detail::kCheckSlack * std::max(1.0, std::abs(phi_chain))) {
                    throw ContractViolation(k, n, "target rose from " + std::to_string(phi_chain) +
                                                      " to " + std::to_string(phi_next));
                }
                phi_chain = phi_next;
            }

            rec.inner_norms.push_back(norm);
            aggregate += step.displacement;
            inner = std::move(step.next);
            if (step.flagged) trace.oracle_flagged = true;

            ell = cursor.index() + 1;  // per-inner-step schedule increment
        }

        rec.beta_k = 0.0;
        for (double v : rec.inner_norms) rec.beta_k = std::max(rec.beta_k, v);
        rec.aggregate_norm = rec.beta_k > 0.0 ? aggregate.norm() / rec.beta_k : 0.0;

        y = problem.feasibility_operator(inner);
        ++k;
        rec.time_s = elapsed();
        trace.iterations.push_back(std::move(rec));
    }

    trace.output = std::move(y);
    trace.outer_count = k;
    trace.final_phi = oracle.target(trace.output);
    trace.total_time_s = elapsed();
    return trace;
}

/// Index of the epsilon-output of a proximity sequence: the least K with
/// prox[K] <= eps (all earlier values then exceed eps by minimality).
/// Empty optional when no element qualifies.
inline std::optional<std::size_t> epsilon_output(std::span<const double> prox, double eps) {
    for (std::size_t i = 0; i < prox.size(); ++i) {
        if (prox[i] <= eps) return i;
    }
    return std::nullopt;
}

/// Resilience audit over a finished run: rebuilds beta_k = max_n ||v^{k,n}||
/// from the recorded inner norms and checks the construction the resilience
/// argument rests on — beta_k bounded by eta at the iteration's entry index,
/// the beta sum within the geometric series bound eta0/(1-kernel), and the
/// normalized aggregate ||v^k|| bounded by N_k.
struct AuditReport {
    bool passed = false;
    double beta_sum = 0.0;
    double summability_bound = 0.0;
    std::vector<long long> beta_violations;       // k with beta_k > eta_{ell_k}
    std::vector<long long> aggregate_violations;  // k with ||v^k|| > N_k
    std::vector<long long> record_mismatches;     // k where recorded beta_k != recomputed
};

inline AuditReport audit_perturbations(const RunTrace& trace, const Schedule& schedule) {
    AuditReport report;
    report.summability_bound = schedule.summability_bound();
    for (const IterationRecord& rec : trace.iterations) {
        double beta = 0.0;
        for (double v : rec.inner_norms) beta = std::max(beta, v);
        if (beta != rec.beta_k) report.record_mismatches.push_back(rec.k);
        report.beta_sum += beta;
        if (beta > schedule.eta(rec.ell_entry) * (1.0 + detail::kCheckSlack)) {
            report.beta_violations.push_back(rec.k);
        }
        if (rec.aggregate_norm >
            static_cast<double>(rec.inner_norms.size()) * (1.0 + detail::kCheckSlack)) {
            report.aggregate_violations.push_back(rec.k);
        }
    }
    report.passed = report.beta_violations.empty() && report.aggregate_violations.empty() &&
                    report.record_mismatches.empty() &&
                    report.beta_sum <= report.summability_bound;
    return report;
}

/// Per-iteration trace as CSV: k,prox,phi,ell_entry,beta_k,vk_norm,time_s.
inline void export_trace_csv(const RunTrace& trace, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_trace_csv: cannot open " + path.string());
    f << "k,prox,phi,ell_entry,beta_k,vk_norm,time_s\n";
    f << std::setprecision(17);
    for (const IterationRecord& rec : trace.iterations) {
        f << rec.k << ',' << rec.proximity << ',' << rec.phi << ',' << rec.ell_entry << ','
          << rec.beta_k << ',' << rec.aggregate_norm << ',' << rec.time_s << '\n';
    }
    if (!f) throw std::runtime_error("export_trace_csv: write failed for " + path.string());
}

}  // namespace supr
