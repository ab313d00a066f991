#include "detspace/bridge.hpp"

#include <cmath>

#include <json.hpp>

namespace detspace {

namespace {

xp::Matrix to_xp(const Eigen::MatrixXcd& m, int digits) {
    return xp::Matrix::from_eigen_rowmajor(Eigen::MatrixXcd(m.transpose()).data(),
                                           static_cast<int>(m.rows()),
                                           static_cast<int>(m.cols()), digits);
}

Eigen::VectorXcd xp_col_to_eigen(const xp::Matrix& v) {
    Eigen::VectorXcd out(v.rows());
    for (int i = 0; i < v.rows(); ++i) out[i] = v.get(i, 0);
    return out;
}

/// alpha^dag B alpha at working precision.
xp::Complex quad_form(const xp::Matrix& b, const xp::Matrix& alpha) {
    xp::Matrix w = b * alpha;
    xp::Complex acc(w.bits());
    for (int i = 0; i < w.rows(); ++i) acc += alpha.at(i, 0).conj() * w.at(i, 0);
    return acc;
}

/// <a|b> of two dense double vectors, accumulated at working precision
/// (exact for the stored inputs).
xp::Complex dot_xp(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b,
                   mpfr_prec_t bits) {
    xp::Complex acc(bits);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        acc += xp::Complex(a[i], bits).conj() * xp::Complex(b[i], bits);
    return acc;
}

void check_times(const std::vector<double>& times) {
    if (times.empty()) throw ValidationError("bridge: empty time grid");
    if (times.front() != 0.0) throw ValidationError("bridge: time grid must start at 0");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] <= times[k - 1])
            throw ValidationError("bridge: time grid must ascend strictly");
}

xp::Matrix scale_entries(const xp::Matrix& m, const cplx& factor) {
    xp::Matrix out(m.rows(), m.cols(), m.digits());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            out.at(i, j) = m.at(i, j) * xp::Complex(factor, out.bits());
    return out;
}

/// The generator at working precision: prefer the assembly-time view.
xp::Matrix minus_i_generator(const RayleighEstimate& m, int digits) {
    if (m.M_xp) {
        if (m.M_xp->digits() >= digits) return scale_entries(*m.M_xp, cplx(0.0, -1.0));
        // Requested precision exceeds the stored one; upgrade entry-wise.
        xp::Matrix up(m.M_xp->rows(), m.M_xp->cols(), digits);
        for (int i = 0; i < up.rows(); ++i)
            for (int j = 0; j < up.cols(); ++j) {
                xp::Complex e(up.bits());
                e.re = m.M_xp->at(i, j).re + xp::Real(0.0, up.bits());
                e.im = m.M_xp->at(i, j).im + xp::Real(0.0, up.bits());
                up.at(i, j) = e;
            }
        return scale_entries(up, cplx(0.0, -1.0));
    }
    return to_xp(cplx(0.0, -1.0) * m.M, digits);
}

struct StepCache {
    struct Entry {
        double spacing;
        xp::Matrix mat;
        double norm_log10;   // log10 of the step-matrix 1-norm, floored at 0
    };
    std::vector<Entry> entries;

    const Entry& get(const xp::Matrix& minus_i_m, double dt, int digits) {
        for (const auto& e : entries)
            if (std::abs(e.spacing - dt) <= 1e-12 * std::max(std::abs(e.spacing), std::abs(dt)))
                return e;
        xp::Matrix em = xp::expm(scale_entries(minus_i_m, cplx(dt, 0.0)));
        const double nrm = em.one_norm().to_double();
        (void)digits;
        entries.push_back({dt, std::move(em), std::max(0.0, std::log10(nrm))});
        return entries.back();
    }
};

} // namespace

BridgeTrajectory bridge_solve(const RayleighEstimate& M, const Eigen::VectorXcd& alpha0,
                              const std::vector<double>& times, int digits,
                              bool direct_per_time) {
    check_times(times);
    const int m = M.m();
    if (alpha0.size() != m) throw ValidationError("bridge: alpha0 length mismatch");
    if (alpha0.norm() == 0.0) throw ValidationError("bridge: alpha0 must not be zero");

    const xp::Matrix minus_i_m = minus_i_generator(M, digits);
    const int wd = minus_i_m.digits();
    const xp::Matrix a0 = to_xp(alpha0, wd);

    BridgeTrajectory traj;
    traj.times = times;
    traj.rayleigh_policy = M.assembly_policy;
    traj.precision_digits = wd;

    auto alphas_xp = std::make_shared<std::vector<xp::Matrix>>();
    alphas_xp->reserve(times.size());

    if (direct_per_time) {
        for (double t : times)
            alphas_xp->push_back(xp::expm(scale_entries(minus_i_m, cplx(t, 0.0))) * a0);
    } else {
        // Digits budget: one step loses up to log10||E|| digits to cancellation
        // and the trajectory spread log10(max||alpha||/min||alpha||) measures
        // how much of that growth is real rather than cancelling. Per-step
        // norms must not simply be summed; for a power-bounded non-normal
        // generator the applications do not compound.
        StepCache cache;
        double max_step_log10 = 0.0;
        double max_amp = std::log10(a0.frobenius_norm().to_double());
        double min_amp = max_amp;
        alphas_xp->push_back(a0);
        for (std::size_t k = 1; k < times.size(); ++k) {
            const double dt = times[k] - times[k - 1];
            const StepCache::Entry& step = cache.get(minus_i_m, dt, wd);
            max_step_log10 = std::max(max_step_log10, step.norm_log10);
            alphas_xp->push_back(step.mat * alphas_xp->back());
            const double amp = std::log10(alphas_xp->back().frobenius_norm().to_double());
            max_amp = std::max(max_amp, amp);
            min_amp = std::min(min_amp, amp);
            if (max_step_log10 + (max_amp - min_amp) > wd - 20) {
                throw NumericalError(
                    "bridge: step-matrix norm growth exhausts the working digits; "
                    "increase --digits");
            }
        }
    }

    for (const auto& a : *alphas_xp) {
        traj.alphas.push_back(xp_col_to_eigen(a));
        if (traj.alphas.back().norm() == 0.0)
            throw NumericalError("bridge: trajectory collapsed to the zero vector");
    }
    traj.alphas_xp = std::move(alphas_xp);
    return traj;
}

BridgeTrajectory bridge_solve_time_dependent(
    const std::vector<RayleighEstimate>& parts,
    const std::function<std::vector<double>(double)>& beta,
    const Eigen::VectorXcd& alpha0, const std::vector<double>& times, int digits) {
    check_times(times);
    if (parts.empty()) throw ValidationError("bridge: no Hamiltonian parts");
    const int m = parts.front().m();
    for (const auto& p : parts)
        if (p.m() != m) throw ValidationError("bridge: part sizes differ");

    BridgeTrajectory traj;
    traj.times = times;
    traj.rayleigh_policy = parts.front().assembly_policy + " (time-dependent)";
    traj.precision_digits = digits;

    // Step matrices are cached per (frozen coefficients, spacing) and built
    // through the same conversion-then-scale sequence as the constant-M path,
    // so a constant beta reduces to it bit for bit.
    std::vector<std::tuple<std::vector<double>, double, xp::Matrix>> cache;
    auto alphas_xp = std::make_shared<std::vector<xp::Matrix>>();
    alphas_xp->push_back(to_xp(alpha0, digits));

    for (std::size_t k = 1; k < times.size(); ++k) {
        const double dt = times[k] - times[k - 1];
        const std::vector<double> coeff = beta(times[k - 1]);
        if (coeff.size() != parts.size())
            throw ValidationError("bridge: beta(t) length must match the part count");

        const xp::Matrix* step = nullptr;
        for (const auto& [c, spacing, mat] : cache)
            if (c == coeff &&
                std::abs(spacing - dt) <= 1e-12 * std::max(std::abs(spacing), std::abs(dt)))
                step = &mat;
        if (step == nullptr) {
            bool all_xp = true;
            for (const auto& p : parts) all_xp = all_xp && p.M_xp != nullptr;
            xp::Matrix minus_i_mt(m, m, digits);
            if (all_xp) {
                // Combine the assembly-time views so a constant beta matches
                // the constant-M path exactly.
                xp::Matrix acc = scale_entries(*parts[0].M_xp, cplx(coeff[0], 0.0));
                for (std::size_t p = 1; p < parts.size(); ++p)
                    acc = acc + scale_entries(*parts[p].M_xp, cplx(coeff[p], 0.0));
                minus_i_mt = scale_entries(acc, cplx(0.0, -1.0));
            } else {
                Eigen::MatrixXcd mt = Eigen::MatrixXcd::Zero(m, m);
                for (std::size_t p = 0; p < parts.size(); ++p) mt += coeff[p] * parts[p].M;
                minus_i_mt = to_xp(cplx(0.0, -1.0) * mt, digits);
            }
            cache.emplace_back(coeff, dt, xp::expm(scale_entries(minus_i_mt, cplx(dt, 0.0))));
            step = &std::get<2>(cache.back());
        }
        alphas_xp->push_back(*step * alphas_xp->back());
    }

    for (const auto& a : *alphas_xp) traj.alphas.push_back(xp_col_to_eigen(a));
    traj.alphas_xp = std::move(alphas_xp);
    return traj;
}

namespace {

/// Working-precision alphas: the solver's own when present, else lifted from
/// the stored doubles.
std::vector<xp::Matrix> working_alphas(const BridgeTrajectory& traj) {
    if (traj.alphas_xp) return *traj.alphas_xp;
    std::vector<xp::Matrix> out;
    out.reserve(traj.alphas.size());
    for (const auto& a : traj.alphas) out.push_back(to_xp(a, traj.precision_digits));
    return out;
}

} // namespace

namespace {

ObservableSeries observable_series(const xp::Matrix& gx, const xp::Matrix& gax,
                                   const BridgeTrajectory& traj) {
    if (gx.rows() != traj.m() || gax.rows() != traj.m())
        throw ValidationError("bridge_observable: pack size mismatch");
    ObservableSeries out;
    out.values.reserve(traj.alphas.size());
    for (const auto& alpha : working_alphas(traj)) {
        const cplx den = quad_form(gx, alpha).to_cplx();
        if (std::abs(den) < 1e-300)
            throw NumericalError("bridge_observable: degenerate norm alpha^dag G alpha");
        const cplx ratio = quad_form(gax, alpha).to_cplx() / den;
        out.values.push_back(ratio.real());
        out.max_imag_residual = std::max(out.max_imag_residual, std::abs(ratio.imag()));
    }
    return out;
}

} // namespace

ObservableSeries bridge_observable(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& G_A,
                                   const BridgeTrajectory& traj) {
    const int digits = traj.precision_digits;
    return observable_series(to_xp(G, digits), to_xp(G_A, digits), traj);
}

ObservableSeries bridge_observable(const GramPack& pack, const std::string& op_label,
                                   const BridgeTrajectory& traj) {
    const int digits = traj.precision_digits;
    const xp::Matrix* gax = pack.op_xp(op_label);
    if (pack.G_xp && gax) return observable_series(*pack.G_xp, *gax, traj);
    return observable_series(to_xp(pack.G, digits), to_xp(pack.op(op_label), digits), traj);
}

std::vector<double> bridge_infidelity(const BridgeTrajectory& traj,
                                      const BasisFamily& family,
                                      const std::vector<AmplitudeState>& oracle_states) {
    if (oracle_states.size() != traj.times.size())
        throw ValidationError("bridge_infidelity: oracle grid does not match the trajectory");
    const int m = family.size();
    if (m != traj.m()) throw ValidationError("bridge_infidelity: family size mismatch");

    // Gram matrix accumulated at working precision straight from the
    // amplitudes; a double Gram's own rounding would dominate the forms.
    const int digits = traj.precision_digits;
    xp::Matrix gx(m, m, digits);
    const mpfr_prec_t bits = gx.bits();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            gx.at(i, j) = dot_xp(family[i].amplitudes, family[j].amplitudes, bits);

    const std::vector<xp::Matrix> alphas = working_alphas(traj);
    std::vector<double> out;
    out.reserve(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& ex = oracle_states[k];
        // overlap = sum_j alpha_j <exact|phi_j>, accumulated at working
        // precision; the alpha components in near-null directions of G cancel
        // here and in the norm below.
        xp::Complex overlap(bits);
        for (int j = 0; j < m; ++j)
            overlap += alphas[k].at(j, 0) * dot_xp(ex.amplitudes, family[j].amplitudes, bits);
        xp::Real alpha_norm2 = quad_form(gx, alphas[k]).re;
        const double den = ex.amplitudes.squaredNorm() * alpha_norm2.to_double();
        if (den <= 0.0) throw NumericalError("bridge_infidelity: degenerate norm");
        const double fid = overlap.abs2().to_double() / den;
        out.push_back(std::clamp(1.0 - fid, 0.0, 1.0));
    }
    return out;
}

double optimal_in_subspace(const BasisFamily& family, const GramPack& pack,
                           const AmplitudeState& oracle_state, int digits) {
    const int m = family.size();
    if (pack.m() != m) throw ValidationError("optimal_in_subspace: pack size mismatch");

    xp::Matrix gx = pack.G_xp ? *pack.G_xp : to_xp(pack.G, digits);
    xp::Matrix vx(m, 1, gx.digits());
    for (int k = 0; k < m; ++k)
        vx.at(k, 0) = dot_xp(family[k].amplitudes, oracle_state.amplitudes, gx.bits());
    xp::Matrix w = xp::solve(gx, vx);
    xp::Complex q(gx.bits());
    for (int k = 0; k < m; ++k) q += vx.at(k, 0).conj() * w.at(k, 0);
    const double projected = q.to_cplx().real() / oracle_state.amplitudes.squaredNorm();
    return std::clamp(1.0 - projected, 0.0, 1.0);
}

double tdvp_residual(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& G_H,
                     const Eigen::VectorXcd& alpha) {
    const cplx nrm2 = (alpha.adjoint() * G * alpha).value();
    if (std::abs(nrm2) == 0.0) throw ValidationError("tdvp_residual: alpha has zero G-norm");

    const Eigen::VectorXcd g_a = G * alpha;
    const Eigen::VectorXcd gh_a = G_H * alpha;
    const cplx e_loc = (alpha.adjoint() * gh_a).value() / nrm2;

    const Eigen::MatrixXcd S = (G - g_a * g_a.adjoint() / nrm2) / nrm2;
    const Eigen::VectorXcd F = (gh_a - e_loc * g_a) / nrm2;

    const Eigen::VectorXcd alpha_dot = cplx(0.0, -1.0) * G.ldlt().solve(gh_a);
    const double num = (S * alpha_dot + cplx(0.0, 1.0) * F).norm();
    const double den = F.norm();
    if (den == 0.0) return num == 0.0 ? 0.0 : num;
    return num / den;
}

std::string trajectory_to_json(const BridgeTrajectory& traj) {
    nlohmann::json j;
    j["times"] = traj.times;
    j["precision_digits"] = traj.precision_digits;
    j["rayleigh_policy"] = traj.rayleigh_policy;
    nlohmann::json alphas = nlohmann::json::array();
    for (const auto& a : traj.alphas) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index i = 0; i < a.size(); ++i) row.push_back({a[i].real(), a[i].imag()});
        alphas.push_back(row);
    }
    j["alphas"] = alphas;
    return j.dump(2);
}

BridgeTrajectory trajectory_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("trajectory JSON: ") + e.what());
    }
    BridgeTrajectory traj;
    traj.times = j.at("times").get<std::vector<double>>();
    traj.precision_digits = j.value("precision_digits", 200);
    traj.rayleigh_policy = j.value("rayleigh_policy", "");
    for (const auto& row : j.at("alphas")) {
        Eigen::VectorXcd a(row.size());
        for (std::size_t i = 0; i < row.size(); ++i)
            a[i] = cplx(row[i][0].get<double>(), row[i][1].get<double>());
        traj.alphas.push_back(std::move(a));
    }
    return traj;
}

} // namespace detspace
