#include "nedsim/fluid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "nedsim/error.hpp"

namespace nedsim::fluid {

namespace {

constexpr const char* kModule = "fluid";

// Shorthand rates. gamma is the per-driver "down" rate mu(1-p) + eta_N;
// outflow(l) the total outflow rate of rider state R_l.
struct Rates {
    double gamma;
    double mu_p;
    double mu, p, eta, eta_n, eta_i, lambda, lambda_d;
    int U;

    double outflow(int l) const { return eta + l * (mu + eta_n); }
};

Rates rates_of(const MarketParams& params, const NotificationProfile& q, const char* op) {
    params.validate();
    q.validate();
    if (q.cap_u() != params.cap_u)
        throw Error(kModule, op,
                    "profile length " + std::to_string(q.q.size()) +
                        " does not match U=" + std::to_string(params.cap_u));
    Rates r;
    r.mu = params.mu;
    r.p = params.p;
    r.eta = params.eta;
    r.eta_n = params.eta_notified;
    r.eta_i = params.eta_idle;
    r.lambda = params.lambda_r;
    r.lambda_d = params.lambda_d;
    r.gamma = params.mu * (1.0 - params.p) + params.eta_notified;
    r.mu_p = params.mu * params.p;
    r.U = params.cap_u;
    return r;
}

// R_l / R_0 via the backward recursion of the rider balance equations
// (the closed form of the equilibrium propositions with products unrolled).
std::vector<double> rider_ratios(const Rates& r, const NotificationProfile& q,
                                 const char* op) {
    std::vector<double> ratio(r.U + 2, 0.0);  // ratio[l] = R_l / R_0, ratio[U+1] = 0
    for (int l = r.U; l >= 1; --l) {
        const double denom = r.outflow(l);
        if (!(denom > 0.0))
            throw Error(kModule, op, "degenerate: no absorption (zero outflow from R_" +
                                         std::to_string(l) + ")");
        ratio[l] = (q.q[l] + (l + 1) * ratio[l + 1] * r.gamma) / denom;
    }
    return ratio;
}

double solve_r0(const Rates& r, const NotificationProfile& q,
                const std::vector<double>& ratio, const char* op) {
    double q_sum = 0.0;
    for (int l = 1; l <= r.U; ++l) q_sum += q.q[l];
    const double denom = r.eta + q_sum - ratio[1] * r.gamma;
    if (!(denom > 1e-14))
        throw Error(kModule, op, "degenerate: no absorption (R_0 balance has zero denominator)");
    return r.lambda / denom;
}

double driver_churn_coef(const Rates& r, int l) {
    // Per-driver exit rate from state D_l: rider renege, own rejection, or a
    // competitor's acceptance.
    return r.eta + r.mu * (1.0 - r.p) + (l - 1) * r.mu_p;
}

double solve_d0(const Rates& r, const NotificationProfile& q, double r0,
                const std::vector<double>& d_mass, const std::vector<double>& a_mass,
                const char* op) {
    if (!(r.eta_i > 0.0))
        throw Error(kModule, op, "eta_idle must be > 0 (D_0 balance divides by it)");
    double notify_out = 0.0;
    for (int l = 1; l <= r.U; ++l) notify_out += l * q.q[l] * r0;
    double inflow = r.lambda_d;
    for (int l = 1; l <= r.U; ++l) inflow += d_mass[l] * driver_churn_coef(r, l);
    for (int l = 2; l <= r.U; ++l) inflow += a_mass[l] * (r.eta + (l - 1) * r.mu_p);
    double d0 = (inflow - notify_out) / r.eta_i;
    if (d0 < 0.0 && d0 > -1e-12) d0 = 0.0;  // forgive roundoff at the boundary
    if (d0 < 0.0)
        throw Error(kModule, op,
                    "supply-infeasible parameters: D_0 = " + std::to_string(d0));
    return d0;
}

}  // namespace

FluidState fa_equilibrium(const MarketParams& params, const NotificationProfile& q) {
    const char* op = "fa_equilibrium";
    const Rates r = rates_of(params, q, op);
    const auto ratio = rider_ratios(r, q, op);
    const double r0 = solve_r0(r, q, ratio, op);

    FluidState s;
    s.r0 = r0;
    s.r.resize(r.U);
    s.d.resize(r.U);
    std::vector<double> d_mass(r.U + 1, 0.0), a_mass(r.U + 1, 0.0);
    for (int l = 1; l <= r.U; ++l) {
        s.r[l - 1] = ratio[l] * r0;
        d_mass[l] = l * s.r[l - 1];  // FA coupling D_l = l R_l
        s.d[l - 1] = d_mass[l];
    }
    s.d0 = solve_d0(r, q, r0, d_mass, a_mass, op);
    return s;
}

FluidState ba_equilibrium(const MarketParams& params, const NotificationProfile& q) {
    const char* op = "ba_equilibrium";
    const Rates r = rates_of(params, q, op);
    const auto ratio = rider_ratios(r, q, op);
    const double r0 = solve_r0(r, q, ratio, op);

    // D_l / R_0 via the rank-state recursion from the BA proof.
    std::vector<double> d_ratio(r.U + 2, 0.0);
    std::vector<double> q_tail(r.U + 2, 0.0);
    for (int l = r.U; l >= 1; --l) q_tail[l] = q_tail[l + 1] + q.q[l];
    for (int l = r.U; l >= 1; --l) {
        const double denom = r.outflow(l);
        if (!(denom > 0.0))
            throw Error(kModule, op, "degenerate: no absorption (zero outflow from D_" +
                                         std::to_string(l) + ")");
        d_ratio[l] = (q_tail[l] + l * d_ratio[l + 1] * r.gamma) / denom;
    }

    FluidState s;
    s.r0 = r0;
    s.r.resize(r.U);
    s.d.resize(r.U);
    std::vector<double> d_mass(r.U + 1, 0.0), a_mass(r.U + 1, 0.0);
    for (int l = 1; l <= r.U; ++l) {
        s.r[l - 1] = ratio[l] * r0;
        d_mass[l] = d_ratio[l] * r0;
        s.d[l - 1] = d_mass[l];
    }
    if (r.U >= 2) {
        s.a.resize(r.U - 1);
        for (int l = 2; l <= r.U; ++l) {
            // Coupling: D_{l-1} - D_l = R_{l-1} + A_l.
            a_mass[l] = d_mass[l - 1] - d_mass[l] - s.r[l - 2];
            s.a[l - 2] = a_mass[l];
        }
    }
    s.d0 = solve_d0(r, q, r0, d_mass, a_mass, op);
    return s;
}

std::vector<double> fa_flow_residual(const MarketParams& params,
                                     const NotificationProfile& q,
                                     const FluidState& state) {
    const char* op = "fa_flow_residual";
    const Rates r = rates_of(params, q, op);
    if (int(state.r.size()) != r.U || int(state.d.size()) != r.U)
        throw Error(kModule, op, "state dimensions do not match U");

    auto R = [&](int l) { return l == 0 ? state.r0 : (l <= r.U ? state.r[l - 1] : 0.0); };
    std::vector<double> res;
    for (int l = 1; l <= r.U; ++l)
        res.push_back(R(l) * r.outflow(l) - state.r0 * q.q[l] -
                      (l + 1) * R(l + 1) * r.gamma);
    double q_sum = 0.0, notify_out = 0.0;
    for (int l = 1; l <= r.U; ++l) {
        q_sum += q.q[l];
        notify_out += l * q.q[l];
    }
    res.push_back(state.r0 * (r.eta + q_sum) - r.lambda - R(1) * r.gamma);
    double driver_in = r.lambda_d;
    for (int l = 1; l <= r.U; ++l) driver_in += state.d[l - 1] * driver_churn_coef(r, l);
    res.push_back(state.d0 * r.eta_i + state.r0 * notify_out - driver_in);
    return res;
}

std::vector<double> ba_flow_residual(const MarketParams& params,
                                     const NotificationProfile& q,
                                     const FluidState& state) {
    const char* op = "ba_flow_residual";
    const Rates r = rates_of(params, q, op);
    const int n_a = std::max(0, r.U - 1);
    if (int(state.r.size()) != r.U || int(state.d.size()) != r.U ||
        int(state.a.size()) != n_a)
        throw Error(kModule, op, "state dimensions do not match U");

    auto R = [&](int l) { return l == 0 ? state.r0 : (l <= r.U ? state.r[l - 1] : 0.0); };
    auto A = [&](int l) { return (l >= 2 && l <= r.U) ? state.a[l - 2] : 0.0; };

    std::vector<double> res;
    for (int l = 1; l <= r.U; ++l)
        res.push_back(R(l) * r.outflow(l) - state.r0 * q.q[l] -
                      (l + 1) * R(l + 1) * r.gamma);
    double q_sum = 0.0, notify_out = 0.0;
    for (int l = 1; l <= r.U; ++l) {
        q_sum += q.q[l];
        notify_out += l * q.q[l];
    }
    res.push_back(state.r0 * (r.eta + q_sum) - r.lambda - R(1) * r.gamma);
    for (int l = 2; l <= r.U; ++l) {
        double inflow = r.mu_p * R(l) + l * A(l + 1) * r.gamma;
        for (int i = l + 1; i <= r.U; ++i) inflow += r.mu_p * (A(i) + R(i));
        res.push_back(A(l) * (r.eta + (l - 1) * (r.mu + r.eta_n)) - inflow);
    }
    double driver_in = r.lambda_d;
    for (int l = 1; l <= r.U; ++l) driver_in += state.d[l - 1] * driver_churn_coef(r, l);
    for (int l = 2; l <= r.U; ++l) driver_in += A(l) * (r.eta + (l - 1) * r.mu_p);
    res.push_back(state.d0 * r.eta_i + state.r0 * notify_out - driver_in);
    return res;
}

FluidState solve_flow_linear(const valuation::Protocol& protocol,
                             const MarketParams& params,
                             const NotificationProfile& q) {
    const char* op = "solve_flow_linear";
    const bool ba = protocol.kind == valuation::ProtocolKind::BA;
    if (!ba && protocol.kind != valuation::ProtocolKind::FA)
        throw Error(kModule, op, "protocol must be FA or BA");
    const Rates r = rates_of(params, q, op);
    const int U = r.U;

    // Unknowns: FA [R_0, R_1..R_U, D_0];  BA [R_0, R_1..R_U, A_2..A_U, D_0].
    const int n_a = ba ? std::max(0, U - 1) : 0;
    const int n = 1 + U + n_a + 1;
    const int ix_r0 = 0;
    auto ix_r = [&](int l) { return l; };            // l = 1..U
    auto ix_a = [&](int l) { return U + l - 1; };    // l = 2..U (BA only)
    const int ix_d0 = n - 1;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    int row = 0;
    for (int l = 1; l <= U; ++l, ++row) {
        A(row, ix_r(l)) = r.outflow(l);
        A(row, ix_r0) -= q.q[l];
        if (l + 1 <= U) A(row, ix_r(l + 1)) = -(l + 1) * r.gamma;
    }
    {
        double q_sum = 0.0;
        for (int l = 1; l <= U; ++l) q_sum += q.q[l];
        A(row, ix_r0) = r.eta + q_sum;
        if (U >= 1) A(row, ix_r(1)) = -r.gamma;
        b(row) = r.lambda;
        ++row;
    }
    if (ba) {
        for (int l = 2; l <= U; ++l, ++row) {
            A(row, ix_a(l)) = r.eta + (l - 1) * (r.mu + r.eta_n);
            A(row, ix_r(l)) -= r.mu_p;
            if (l + 1 <= U) A(row, ix_a(l + 1)) -= l * r.gamma;
            for (int i = l + 1; i <= U; ++i) {
                A(row, ix_a(i)) -= r.mu_p;
                A(row, ix_r(i)) -= r.mu_p;
            }
        }
    }
    {
        // Driver balance, with D_l substituted: FA D_l = l R_l;
        // BA D_l = sum_{j>=l} R_j + sum_{j>l} A_j.
        A(row, ix_d0) = r.eta_i;
        double notify_out = 0.0;
        for (int l = 1; l <= U; ++l) notify_out += l * q.q[l];
        A(row, ix_r0) += notify_out;
        for (int l = 1; l <= U; ++l) {
            const double c = driver_churn_coef(r, l);
            if (!ba) {
                A(row, ix_r(l)) -= l * c;
            } else {
                for (int j = l; j <= U; ++j) A(row, ix_r(j)) -= c;
                for (int j = l + 1; j <= U; ++j) A(row, ix_a(j)) -= c;
            }
        }
        if (ba)
            for (int l = 2; l <= U; ++l) A(row, ix_a(l)) -= r.eta + (l - 1) * r.mu_p;
        b(row) = r.lambda_d;
        ++row;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw Error(kModule, op, "singular system");
    Eigen::VectorXd x = lu.solve(b);

    FluidState s;
    s.r0 = x(ix_r0);
    s.r.resize(U);
    s.d.resize(U);
    for (int l = 1; l <= U; ++l) s.r[l - 1] = x(ix_r(l));
    if (ba) {
        s.a.assign(std::max(0, U - 1), 0.0);
        for (int l = 2; l <= U; ++l) s.a[l - 2] = x(ix_a(l));
        for (int l = 1; l <= U; ++l) {
            double d = 0.0;
            for (int j = l; j <= U; ++j) d += s.r[j - 1];
            for (int j = l + 1; j <= U; ++j) d += s.a[j - 2];
            s.d[l - 1] = d;
        }
    } else {
        for (int l = 1; l <= U; ++l) s.d[l - 1] = l * s.r[l - 1];
    }
    s.d0 = x(ix_d0);

    const auto res = ba ? ba_flow_residual(params, q, s) : fa_flow_residual(params, q, s);
    double res_inf = 0.0, scale = 1.0;
    for (double v : res) res_inf = std::max(res_inf, std::abs(v));
    scale = std::max({1.0, std::abs(s.r0), std::abs(s.d0)});
    if (res_inf > 1e-9 * scale)
        throw Error(kModule, op, "ill-conditioned solve: residual " + std::to_string(res_inf));
    return s;
}

AbsorptionModel build_generator(const valuation::Protocol& protocol,
                                const MarketParams& params,
                                const NotificationProfile& q) {
    const char* op = "build_generator";
    const bool ba = protocol.kind == valuation::ProtocolKind::BA;
    if (!ba && protocol.kind != valuation::ProtocolKind::FA)
        throw Error(kModule, op, "protocol must be FA or BA");
    const Rates r = rates_of(params, q, op);
    const int U = r.U;

    AbsorptionModel model;
    model.m = ba ? 2 * U : U + 1;
    model.M.assign(model.m, std::vector<double>(model.m, 0.0));
    model.q_abs.assign(model.m, std::vector<double>(2, 0.0));

    // State indexing: [R_0, R_1, ..., R_U] then for BA [A_U, A_{U-1}, ..., A_2].
    auto ix_rstate = [&](int l) { return l; };
    auto ix_astate = [&](int l) { return U + 1 + (U - l); };  // l = U..2
    model.state_names.resize(model.m);
    for (int l = 0; l <= U; ++l) model.state_names[ix_rstate(l)] = "R" + std::to_string(l);
    if (ba)
        for (int l = U; l >= 2; --l) model.state_names[ix_astate(l)] = "A" + std::to_string(l);

    // Renege from every transient state.
    for (int i = 0; i < model.m; ++i) model.q_abs[i][0] = r.eta;

    // R_0 -> R_l at the (normalized) notification rates q_l.
    for (int l = 1; l <= U; ++l) model.M[ix_rstate(0)][ix_rstate(l)] = q.q[l];

    for (int l = 1; l <= U; ++l) {
        const int i = ix_rstate(l);
        model.M[i][ix_rstate(l - 1)] += l * r.gamma;  // rejection / churn cascade
        if (!ba) {
            model.q_abs[i][1] = l * r.mu_p;  // any acceptance finalizes
        } else {
            model.q_abs[i][1] = r.mu_p;  // only the top-ranked acceptance finalizes
            for (int j = 2; j <= l; ++j) model.M[i][ix_astate(j)] += r.mu_p;
        }
    }

    if (ba) {
        for (int l = 2; l <= U; ++l) {
            const int i = ix_astate(l);
            if (l == 2) {
                model.q_abs[i][1] = r.mu + r.eta_n;  // sole outstanding driver resolves
                continue;
            }
            model.q_abs[i][1] = r.mu_p;  // rank-1 accepts
            for (int j = 2; j <= l - 1; ++j) model.M[i][ix_astate(j)] += r.mu_p;
            model.M[i][ix_astate(l - 1)] += (l - 1) * r.gamma;
        }
    }

    // Diagonal closes each row of [M|Q] to zero.
    for (int i = 0; i < model.m; ++i) {
        double total = model.q_abs[i][0] + model.q_abs[i][1];
        for (int j = 0; j < model.m; ++j)
            if (j != i) total += model.M[i][j];
        model.M[i][i] = -total;
    }
    return model;
}

AbsorptionMetrics absorption_metrics(const AbsorptionModel& model) {
    const char* op = "absorption_metrics";
    const int m = model.m;
    Eigen::MatrixXd M(m, m), Q(m, 2);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) M(i, j) = model.M[i][j];
        Q(i, 0) = model.q_abs[i][0];
        Q(i, 1) = model.q_abs[i][1];
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw Error(kModule, op, "no absorption from some state (singular transient matrix)");

    const Eigen::MatrixXd N = -lu.inverse();
    const Eigen::MatrixXd P = N * Q;       // absorption probabilities
    const Eigen::MatrixXd T = N * P;       // N^2 Q: unconditional accumulated times

    AbsorptionMetrics out;
    out.match_prob.resize(m);
    out.renege_prob.resize(m);
    out.cond_match_time.resize(m);
    for (int i = 0; i < m; ++i) {
        out.renege_prob[i] = P(i, 0);
        out.match_prob[i] = P(i, 1);
        out.cond_match_time[i] = P(i, 1) > 0.0
                                     ? T(i, 1) / P(i, 1)
                                     : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace nedsim::fluid
