#pragma once

#include "asymptotics.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "evolve.hpp"
#include "parabolic.hpp"
#include "spectral.hpp"
#include "tempered.hpp"

#include <json.hpp>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace parajacobi {

struct Overrides {
    std::optional<double> x;
    std::optional<double> eta;
    std::optional<Index> n;
    std::optional<Index> j;
    std::optional<int> threads;
    std::optional<std::string> out;
};

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"limits", "tau",      "trace",  "discr",  "turan",
                                            "phase",  "kernel",   "classify", "report", "perturb"};
    return c;
}

inline int thread_count(const Overrides& o) {
    if (o.threads && *o.threads > 0) return *o.threads;
    if (const char* env = std::getenv("PARAJACOBI_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Runs body(k) for k in [0, count) over a pool; results are written by index, so the
// output does not depend on the thread count. The first exception is rethrown.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const int used = static_cast<int>(std::min<std::size_t>(count, static_cast<std::size_t>(threads)));
    for (int t = 0; t < used; ++t) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// Log-spaced integers in [lo, hi], deduplicated, always including both ends.
inline std::vector<Index> log_marks(Index lo, Index hi, int per_decade = 10) {
    std::vector<Index> out;
    if (hi < lo) return out;
    const double l0 = std::log10(static_cast<double>(std::max<Index>(lo, 1)));
    const double l1 = std::log10(static_cast<double>(hi));
    const int steps = std::max(1, static_cast<int>(std::ceil((l1 - l0) * per_decade)));
    for (int k = 0; k <= steps; ++k) {
        const Index v = std::clamp<Index>(static_cast<Index>(std::llround(std::pow(10.0, l0 + (l1 - l0) * k / steps))), lo, hi);
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    if (out.back() != hi) out.push_back(hi);
    return out;
}

inline json limits_json(const TemperedLimits& L) {
    json j;
    j["s"] = L.s;
    j["r"] = L.r;
    j["u"] = L.u;
    j["t"] = L.t;
    j["S"] = L.S;
    j["U"] = L.U;
    j["tau"] = {{"slope", L.tau_slope}, {"intercept", L.tau_intercept}};
    j["x0"] = L.x0 ? json(*L.x0) : json(nullptr);
    j["diagnostics"] = {{"t_raw", L.t_raw},       {"S_direct", L.S_direct},   {"U_direct", L.U_direct},
                        {"epsilon", L.epsilon},   {"trace_derivative", L.trace_derivative},
                        {"n_max", L.n_max},       {"checkpoint", L.checkpoint},
                        {"max_spread", L.max_spread}, {"notes", L.notes}};
    return j;
}

inline json intervals_json(const IntervalSet& s) {
    json arr = json::array();
    for (const auto& p : s.parts)
        arr.push_back({{"lo", std::isinf(p.lo) ? json("-inf") : json(p.lo)}, {"hi", std::isinf(p.hi) ? json("inf") : json(p.hi)}});
    return arr;
}

inline json report_json(const SpectrumReport& r) {
    json j;
    j["family"] = r.family;
    j["self_adjoint"] = {{"verdict", to_string(r.self_adjoint.verdict)},
                         {"reason", r.self_adjoint.reason},
                         {"theorem", r.self_adjoint.theorem}};
    if (r.self_adjoint.rho_test) {
        const auto& t = *r.self_adjoint.rho_test;
        j["self_adjoint"]["rho_slope"] = t.slope;
        j["self_adjoint"]["rho_slope_last"] = t.slope_last;
        j["self_adjoint"]["rho_slope_prev"] = t.slope_prev;
    }
    if (r.self_adjoint.sign_quantity) j["self_adjoint"]["sign_quantity"] = *r.self_adjoint.sign_quantity;
    j["tau"] = {{"slope", r.tau_slope}, {"intercept", r.tau_intercept}};
    j["x0"] = r.x0 ? json(*r.x0) : json(nullptr);
    j["lambda_minus"] = intervals_json(r.lambda_minus);
    j["lambda_plus"] = intervals_json(r.lambda_plus);
    j["sigma_ess"] = r.sigma_ess;
    j["sigma_ac"] = r.sigma_ac;
    if (!r.spectrum_reason.empty()) j["spectrum_reason"] = r.spectrum_reason;
    json crit = json::array();
    for (const auto& c : r.criteria)
        crit.push_back({{"id", c.id}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
    j["criteria"] = crit;
    j["provenance"] = r.provenance;
    return j;
}

class Runner {
public:
    Runner(RunConfig cfg, Overrides ov) : cfg_(std::move(cfg)), ov_(std::move(ov)) {
        fam_ = family_from_json(cfg_.family);
        out_ = ov_.out ? *ov_.out : cfg_.output_dir;
        threads_ = thread_count(ov_);
    }

    // Returns 0 when every verdict is decided, 2 when any is undetermined.
    int run(const std::string& command) {
        std::filesystem::create_directories(out_);
        json block;
        int code = 0;
        if (command == "limits") code = limits(block);
        else if (command == "tau") code = tau_cmd(block);
        else if (command == "trace") code = trace(block);
        else if (command == "discr") code = discr_cmd(block);
        else if (command == "turan") code = turan_cmd(block);
        else if (command == "phase") code = phase(block);
        else if (command == "kernel") code = kernel(block);
        else if (command == "classify") code = classify_cmd(block);
        else if (command == "report") code = report(block);
        else if (command == "perturb") code = perturb(block);
        else throw Error(ErrorKind::config, "unknown command '" + command + "'");
        merge_report(command, block);
        return code;
    }

    const FamilyDescriptor& family() const { return fam_; }
    std::string csv_path(const std::string& command) const { return (std::filesystem::path(out_) / (command + ".csv")).string(); }
    std::string report_path() const { return (std::filesystem::path(out_) / "report.json").string(); }

private:
    RunConfig cfg_;
    Overrides ov_;
    FamilyDescriptor fam_;
    std::string out_;
    int threads_ = 1;
    std::optional<ParabolicDecomposition> decomp_;
    std::optional<TemperedLimits> limits_;

    Index n_max() const { return ov_.n ? *ov_.n : cfg_.n_max; }
    Index j_max() const { return ov_.j ? *ov_.j : cfg_.j_max; }

    const ParabolicDecomposition& decomp() {
        if (!decomp_) decomp_ = decompose(fam_.periodic, cfg_.tol("classify"));
        return *decomp_;
    }
    const TemperedLimits& lims() {
        if (!limits_) {
            LimitOptions o;
            o.spread_tol = cfg_.tol("spread");
            limits_ = estimate_limits(fam_, decomp(), std::max<Index>(n_max(), 1000), o);
        }
        return *limits_;
    }

    std::vector<double> xs() {
        if (ov_.x) return {*ov_.x};
        return punctured_grid(cfg_.grid, lims().x0, cfg_.tol("puncture"));
    }
    std::vector<double> etas() const { return ov_.eta ? std::vector<double>{*ov_.eta} : cfg_.eta_angles; }
    std::vector<double> lambda_minus_xs() {
        std::vector<double> out;
        for (double x : xs())
            if (tau(lims(), x) < 0.0) out.push_back(x);
        return out;
    }

    std::ofstream open_csv(const std::string& command) const {
        std::ofstream os(csv_path(command), std::ios::binary);
        if (!os) throw Error(ErrorKind::config, "cannot write " + csv_path(command));
        return os;
    }

    void merge_report(const std::string& command, const json& block) const {
        json all = json::object();
        std::ifstream in(report_path());
        if (in) {
            try {
                all = json::parse(in);
            } catch (const json::exception&) {
                all = json::object();
            }
        }
        all["family"] = cfg_.family;
        all[command] = block;
        std::ofstream os(report_path(), std::ios::binary);
        os << all.dump(2) << '\n';
    }

    int limits(json& block) {
        const auto& L = lims();
        auto os = open_csv("limits");
        CsvWriter w(os, {"quantity", "residue", "value"});
        for (std::size_t i = 0; i < L.s.size(); ++i) {
            w.row("s", static_cast<long long>(i), L.s[i]);
            w.row("r", static_cast<long long>(i), L.r[i]);
            w.row("u", static_cast<long long>(i), L.u[i]);
        }
        w.row("t", -1LL, static_cast<double>(L.t));
        w.row("S", -1LL, L.S);
        w.row("U", -1LL, L.U);
        w.row("tau_slope", -1LL, L.tau_slope);
        w.row("tau_intercept", -1LL, L.tau_intercept);
        block = limits_json(L);
        return 0;
    }

    int tau_cmd(json& block) {
        const auto& L = lims();
        const auto tp = lambda_sets(L);
        auto os = open_csv("tau");
        CsvWriter w(os, {"x", "tau", "region"});
        json vals = json::array();
        for (double x : xs()) {
            const double v = tau(L, x);
            w.row(x, v, std::string(v < 0 ? "minus" : v > 0 ? "plus" : "zero"));
            vals.push_back({{"x", x}, {"tau", v}});
        }
        if (ov_.x) std::cout << fmt17(tau(L, *ov_.x)) << '\n';
        block = {{"slope", L.tau_slope}, {"intercept", L.tau_intercept}, {"values", vals},
                 {"lambda_minus", intervals_json(tp.lambda_minus)}, {"lambda_plus", intervals_json(tp.lambda_plus)},
                 {"limits", limits_json(L)}};
        return 0;
    }

    int trace(json& block) {
        const double x = ov_.x ? *ov_.x : cfg_.grid.x_min;
        const double eta = ov_.eta ? *ov_.eta : cfg_.eta_angles.front();
        const Index n = ov_.n ? *ov_.n : cfg_.n_max;
        const auto t = eigenvector_trace(fam_, eta, x, n, TraceOptions{true});
        auto os = open_csv("trace");
        write_trace_csv(os, t);
        block = {{"x", x}, {"eta", eta}, {"n", n}, {"rows", t.size()}, {"recurrence_residual", recurrence_residual(fam_, t)}};
        return 0;
    }

    int discr_cmd(json& block) {
        const auto& L = lims();
        const Index N = fam_.period();
        const auto grid = xs();
        const auto marks = log_marks(1, j_max());
        std::vector<std::vector<std::array<double, 2>>> vals(grid.size() * static_cast<std::size_t>(N));
        parallel_for(vals.size(), threads_, [&](std::size_t k) {
            const double x = grid[k / N];
            const Index i = static_cast<Index>(k % N);
            for (Index j : marks) vals[k].push_back({scaled_discriminant(fam_, i, j, x), 4.0 * tau(L, x) * fam_.alpha(i - 1)});
        });
        auto os = open_csv("discr");
        CsvWriter w(os, {"x", "i", "j", "value", "reference_limit", "abs_error"});
        json summary = json::array();
        for (std::size_t k = 0; k < vals.size(); ++k) {
            for (std::size_t m = 0; m < marks.size(); ++m)
                w.row(grid[k / N], static_cast<long long>(k % N), static_cast<long long>(marks[m]), vals[k][m][0],
                      vals[k][m][1], std::abs(vals[k][m][0] - vals[k][m][1]));
            summary.push_back({{"x", grid[k / N]}, {"i", k % N}, {"final_abs_error", std::abs(vals[k].back()[0] - vals[k].back()[1])}});
        }
        block = {{"j_max", j_max()}, {"series", summary}};
        return 0;
    }

    int turan_cmd(json& block) {
        const Index N = fam_.period();
        const auto grid = lambda_minus_xs();
        const auto eta = etas();
        const auto marks = log_marks(1, j_max());
        struct Series {
            std::vector<double> v;
            double ref = 0.0;
            double fluct = 0.0;
        };
        std::vector<Series> out(grid.size() * eta.size() * static_cast<std::size_t>(N));
        parallel_for(out.size(), threads_, [&](std::size_t k) {
            const double x = grid[k / (eta.size() * N)];
            const double e = eta[(k / N) % eta.size()];
            const Index i = static_cast<Index>(k % N);
            const auto t = eigenvector_trace(fam_, e, x, (j_max() + 2) * N);
            for (Index j : marks) out[k].v.push_back(std::abs(turan(fam_, t, j * N + i)));
            std::vector<double> tail;
            for (Index j = j_max() / 10; j <= j_max(); ++j) tail.push_back(std::abs(turan(fam_, t, j * N + i)));
            double s = 0.0;
            for (double v : tail) s += v;
            out[k].ref = s / static_cast<double>(tail.size());
            out[k].fluct = relative_fluctuation(tail);
        });
        auto os = open_csv("turan");
        CsvWriter w(os, {"x", "eta", "i", "j", "value", "reference_limit", "abs_error"});
        json summary = json::array();
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double x = grid[k / (eta.size() * N)];
            const double e = eta[(k / N) % eta.size()];
            for (std::size_t m = 0; m < marks.size(); ++m)
                w.row(x, e, static_cast<long long>(k % N), static_cast<long long>(marks[m]), out[k].v[m], out[k].ref,
                      std::abs(out[k].v[m] - out[k].ref));
            summary.push_back({{"x", x}, {"eta", e}, {"i", k % N}, {"limit_estimate", out[k].ref},
                               {"tail_relative_fluctuation", out[k].fluct}});
        }
        block = {{"j_max", j_max()}, {"series", summary}};
        return 0;
    }

    int phase(json& block) {
        const auto& L = lims();
        const Index N = fam_.period();
        const auto grid = lambda_minus_xs();
        const auto eta = etas();
        std::vector<std::optional<PhaseAmplitude>> out(grid.size() * eta.size() * static_cast<std::size_t>(N));
        std::vector<std::string> errors(out.size());
        parallel_for(out.size(), threads_, [&](std::size_t k) {
            try {
                out[k] = extract_phase(fam_, decomp(), L, static_cast<Index>(k % N), eta[(k / N) % eta.size()],
                                       grid[k / (eta.size() * N)], j_max());
            } catch (const Error& e) {
                errors[k] = std::string(to_string(e.kind())) + ": " + e.what();
            }
        });
        auto os = open_csv("phase");
        CsvWriter w(os, {"x", "eta", "i", "phi_abs", "phi_arg", "phi_abs_C", "j0", "delta", "sup_residual_tail", "status"});
        json rows = json::array();
        int code = 0;
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double x = grid[k / (eta.size() * N)];
            const double e = eta[(k / N) % eta.size()];
            if (!out[k]) {
                code = 2;
                const double nan = std::numeric_limits<double>::quiet_NaN();
                w.row(x, e, static_cast<long long>(k % N), nan, nan, nan, -1LL, nan, nan, std::string("undetermined"));
                rows.push_back({{"x", x}, {"eta", e}, {"i", k % N}, {"error", errors[k]}});
                continue;
            }
            const auto& p = *out[k];
            const double sup = p.degenerate ? 0.0 : p.sup_residual(j_max() / 2, j_max());
            w.row(x, e, static_cast<long long>(k % N), p.phi_abs, p.phi_arg, p.phi_abs_C, static_cast<long long>(p.j0),
                  p.delta, sup, std::string(p.degenerate ? "degenerate" : "ok"));
            rows.push_back({{"x", x}, {"eta", e}, {"i", k % N}, {"j0", p.j0}, {"delta", p.delta},
                            {"phi", {p.phi.real(), p.phi.imag()}}, {"phi_abs", p.phi_abs}, {"phi_arg", p.phi_arg},
                            {"degenerate", p.degenerate}});
        }
        block = {{"j_max", j_max()}, {"phases", rows}};
        return code;
    }

    int kernel(json& block) {
        const auto& L = lims();
        const Index N = fam_.period();
        const auto grid = lambda_minus_xs();
        const auto eta = etas();
        const Index n = j_max() * N;
        const auto marks = log_marks(1, n);
        struct Series {
            std::vector<double> v;
            double ref = std::numeric_limits<double>::quiet_NaN();
            std::string error;
        };
        std::vector<Series> out(grid.size() * eta.size());
        parallel_for(out.size(), threads_, [&](std::size_t k) {
            const double x = grid[k / eta.size()];
            const double e = eta[k % eta.size()];
            const auto t = eigenvector_trace(fam_, e, x, n);
            const auto ratio = christoffel_ratio_series(fam_, t);
            for (Index m : marks) out[k].v.push_back(ratio[static_cast<std::size_t>(m)]);
            try {
                std::vector<PhaseAmplitude> ph;
                for (Index i = 0; i < N; ++i) ph.push_back(extract_phase(fam_, decomp(), L, i, e, x, j_max()));
                out[k].ref = kernel_limit_from_phases(ph);
            } catch (const Error& err) {
                out[k].error = err.what();
            }
        });
        auto os = open_csv("kernel");
        CsvWriter w(os, {"x", "eta", "n", "value", "reference_limit", "abs_error"});
        json rows = json::array();
        int code = 0;
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double x = grid[k / eta.size()];
            const double e = eta[k % eta.size()];
            for (std::size_t m = 0; m < marks.size(); ++m)
                w.row(x, e, static_cast<long long>(marks[m]), out[k].v[m], out[k].ref, std::abs(out[k].v[m] - out[k].ref));
            json r = {{"x", x}, {"eta", e}, {"final", out[k].v.back()}};
            if (out[k].error.empty()) r["phase_assembly"] = out[k].ref;
            else {
                r["error"] = out[k].error;
                code = 2;
            }
            rows.push_back(r);
        }
        block = {{"n", n}, {"series", rows}};
        return code;
    }

    int classify_cmd(json& block) {
        const auto c = classify_detail(fam_.periodic, cfg_.tol("classify"));
        auto os = open_csv("classify");
        CsvWriter w(os, {"key", "value"});
        w.row("case", std::string(to_string(c.kase)));
        w.row("trace", fmt17(c.trace));
        w.row("scalar_distance", fmt17(c.scalar_distance));
        block = {{"case", to_string(c.kase)}, {"trace", c.trace}, {"scalar_distance", c.scalar_distance}};
        if (c.kase != Case::IIb) return 0;
        const auto& L = lims();
        const auto tp = lambda_sets(L);
        const auto v = classify_selfadjoint(fam_, L, tp, n_max());
        w.row("epsilon", std::to_string(decomp().epsilon));
        w.row("self_adjoint", std::string(to_string(v.verdict)));
        w.row("reason", v.reason);
        block["epsilon"] = decomp().epsilon;
        block["self_adjoint"] = {{"verdict", to_string(v.verdict)}, {"reason", v.reason}, {"theorem", v.theorem}};
        return v.verdict == Verdict::undetermined ? 2 : 0;
    }

    static int report_code(const SpectrumReport& r) {
        if (r.self_adjoint.verdict == Verdict::undetermined) return 2;
        if (r.self_adjoint.verdict == Verdict::yes && r.sigma_ess == "undetermined") return 2;
        return 0;
    }

    static void write_criteria(std::ostream& os, const SpectrumReport& r) {
        CsvWriter w(os, {"criterion", "value", "threshold", "pass"});
        for (const auto& c : r.criteria) w.row(c.id, c.value, c.threshold, std::string(c.pass ? "true" : "false"));
    }

    ReportOptions report_options() const {
        ReportOptions o;
        o.n_max = n_max();
        o.diag_n = std::min<Index>(j_max() * fam_.period(), 100000);
        o.classify_tol = cfg_.tol("classify");
        return o;
    }

    int report(json& block) {
        const auto& L = lims();
        const auto tp = lambda_sets(L);
        const auto r = spectrum_report(fam_, decomp(), L, tp, report_options());
        auto os = open_csv("report");
        write_criteria(os, r);
        block = report_json(r);
        block["limits"] = limits_json(L);
        return report_code(r);
    }

    int perturb(json& block) {
        if (!cfg_.perturbation) throw Error(ErrorKind::config, "perturb needs a 'perturbation' block");
        const auto pf = perturbation_from_spec(fam_, *cfg_.perturbation);
        const auto p = perturbed_report(pf, report_options(), std::min<Index>(j_max(), 100000));
        auto os = open_csv("perturb");
        write_criteria(os, p.analysis.report);
        block = report_json(p.analysis.report);
        block["summability"] = {{"partial_sum", p.summability.partial_sum},
                                {"accepted", p.summability.accepted},
                                {"warning", p.summability.warning}};
        json dm = json::array();
        for (const auto& [x, d] : p.det_M) dm.push_back({{"x", x}, {"det_M", d}});
        block["det_M"] = dm;
        block["limits"] = limits_json(p.analysis.limits);
        return report_code(p.analysis.report);
    }
};

} // namespace parajacobi
