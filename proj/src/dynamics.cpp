#include "detspace/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace detspace {

std::string SchemeSpec::name() const {
    switch (kind) {
        case SchemeKind::exact: return "exact";
        case SchemeKind::taylor: return "taylor" + std::to_string(order);
        case SchemeKind::lpe: return "lpe" + std::to_string(order);
        case SchemeKind::slpe: return "slpe" + std::to_string(order);
        case SchemeKind::trotter2: return "trotter2";
    }
    return "?";
}

namespace {

/// Monic-polynomial root refinement: Newton from the companion-matrix
/// eigenvalues, then a residual check on the recomposed coefficients.
std::vector<cplx> polished_roots(const std::vector<cplx>& coeffs_low_to_high) {
    const int deg = static_cast<int>(coeffs_low_to_high.size()) - 1;
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(deg, deg);
    const cplx lead = coeffs_low_to_high[deg];
    for (int i = 0; i < deg; ++i) {
        if (i + 1 < deg) companion(i + 1, i) = 1.0;
        companion(i, deg - 1) = -coeffs_low_to_high[i] / lead;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(companion);
    std::vector<cplx> roots(es.eigenvalues().data(), es.eigenvalues().data() + deg);

    auto eval = [&](cplx z, cplx& p, cplx& dp) {
        p = 0.0;
        dp = 0.0;
        for (int k = deg; k >= 0; --k) {
            dp = dp * z + p;
            p = p * z + coeffs_low_to_high[k];
        }
    };
    for (auto& r : roots) {
        for (int it = 0; it < 60; ++it) {
            cplx p, dp;
            eval(r, p, dp);
            if (std::abs(p) < 1e-15 || std::abs(dp) == 0.0) break;
            r -= p / dp;
        }
    }
    return roots;
}

/// Product of (1 - i a_k x) as polynomial coefficients in x, low to high.
std::vector<cplx> lpe_product_coeffs(const std::vector<cplx>& a) {
    std::vector<cplx> poly{1.0};
    const cplx mi(0.0, -1.0);
    for (const cplx& ak : a) {
        std::vector<cplx> next(poly.size() + 1, cplx(0.0));
        for (std::size_t j = 0; j < poly.size(); ++j) {
            next[j] += poly[j];
            next[j + 1] += poly[j] * mi * ak;
        }
        poly = std::move(next);
    }
    return poly;
}

void check_lpe_residual(const std::vector<cplx>& a) {
    const auto poly = lpe_product_coeffs(a);
    cplx target(1.0, 0.0);
    double fact = 1.0;
    for (std::size_t j = 0; j < poly.size(); ++j) {
        if (j > 0) {
            target *= cplx(0.0, -1.0);
            fact *= static_cast<double>(j);
        }
        if (std::abs(poly[j] - target / fact) > 1e-13)
            throw NumericalError("lpe coefficients failed the polynomial identity check");
    }
}

} // namespace

SchemeSpec scheme_coefficients(SchemeKind kind, int order) {
    if (order > 4) throw ValidationError("scheme order must be <= 4");
    SchemeSpec s;
    s.kind = kind;
    s.order = order;
    switch (kind) {
        case SchemeKind::exact:
        case SchemeKind::taylor:
            if (kind == SchemeKind::taylor && order < 1)
                throw ValidationError("taylor order must be >= 1");
            break;
        case SchemeKind::lpe: {
            if (order < 1) throw ValidationError("lpe order must be >= 1");
            // Roots r_j of the truncated exponential sum_{j<=s} y^j / j!
            // give the factors via a_j = -1 / r_j.
            std::vector<cplx> trunc;
            double fact = 1.0;
            for (int j = 0; j <= order; ++j) {
                if (j > 0) fact *= j;
                trunc.emplace_back(1.0 / fact, 0.0);
            }
            for (const cplx& r : polished_roots(trunc)) s.a.push_back(-1.0 / r);
            std::sort(s.a.begin(), s.a.end(), [](const cplx& x, const cplx& y) {
                return x.imag() > y.imag();
            });
            check_lpe_residual(s.a);
            break;
        }
        case SchemeKind::slpe: {
            if (order != 2)
                throw ValidationError("slpe: only order 2 is supported");
            // a's solve the same quadratic as lpe2; b's follow from the mixed
            // order conditions a2 b1 = 1/2 and a1 + a2 b2 = 1/2.
            SchemeSpec lpe2 = scheme_coefficients(SchemeKind::lpe, 2);
            s.a = lpe2.a;
            const cplx a1 = s.a[0], a2 = s.a[1];
            s.b = {cplx(1.0) / (2.0 * a2), (cplx(0.5) - a1) / a2};
            if (std::abs(s.a[0] + s.a[1] - 1.0) > 1e-14 ||
                std::abs(s.a[0] * s.a[1] - 0.5) > 1e-14 ||
                std::abs(s.b[0] + s.b[1] - 1.0) > 1e-14 ||
                std::abs(a2 * s.b[0] - 0.5) > 1e-14 ||
                std::abs(a1 + a2 * s.b[1] - 0.5) > 1e-14)
                throw NumericalError("slpe2 coefficients failed the order conditions");
            break;
        }
        case SchemeKind::trotter2:
            s.order = 2;
            break;
    }
    return s;
}

SchemeSpec parse_scheme(const std::string& text) {
    if (text == "exact") return scheme_coefficients(SchemeKind::exact, 0);
    if (text == "trotter2") return scheme_coefficients(SchemeKind::trotter2, 2);
    auto tail_order = [&](const std::string& head) -> int {
        return std::stoi(text.substr(head.size()));
    };
    try {
        if (text.rfind("taylor", 0) == 0)
            return scheme_coefficients(SchemeKind::taylor, tail_order("taylor"));
        if (text.rfind("slpe", 0) == 0)
            return scheme_coefficients(SchemeKind::slpe, tail_order("slpe"));
        if (text.rfind("lpe", 0) == 0)
            return scheme_coefficients(SchemeKind::lpe, tail_order("lpe"));
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
    throw ValidationError("unknown scheme: " + text);
}

Eigen::MatrixXcd scheme_step_matrix(const SchemeSpec& scheme, const Eigen::MatrixXcd& H,
                                    double delta) {
    const Eigen::Index n = H.rows();
    const cplx mi(0.0, -1.0);
    switch (scheme.kind) {
        case SchemeKind::exact:
            return expm_dense(mi * delta * H);
        case SchemeKind::taylor: {
            Eigen::MatrixXcd sum = Eigen::MatrixXcd::Identity(n, n);
            Eigen::MatrixXcd term = sum;
            for (int j = 1; j <= scheme.order; ++j)
                sum += (term = (term * (mi * delta) * H) / static_cast<double>(j));
            return sum;
        }
        case SchemeKind::lpe: {
            Eigen::MatrixXcd prod = Eigen::MatrixXcd::Identity(n, n);
            for (const cplx& ak : scheme.a)
                prod = prod * (Eigen::MatrixXcd::Identity(n, n) + mi * ak * delta * H);
            return prod;
        }
        case SchemeKind::slpe: {
            const Eigen::MatrixXcd H0 = H.diagonal().asDiagonal();
            const Eigen::MatrixXcd H1 = H - H0;
            Eigen::MatrixXcd prod = Eigen::MatrixXcd::Identity(n, n);
            for (std::size_t k = 0; k < scheme.a.size(); ++k) {
                prod = prod *
                       (Eigen::MatrixXcd::Identity(n, n) + mi * scheme.a[k] * delta * H1) *
                       expm_dense(mi * scheme.b[k] * delta * H0);
            }
            return prod;
        }
        case SchemeKind::trotter2: {
            const Eigen::MatrixXcd H0 = H.diagonal().asDiagonal();
            const Eigen::MatrixXcd H1 = H - H0;
            const Eigen::MatrixXcd half = expm_dense(mi * (delta / 2.0) * H0);
            return half * expm_dense(mi * delta * H1) * half;
        }
    }
    throw ValidationError("scheme_step_matrix: bad scheme");
}

// ---------------------------------------------------------------------------
// Krylov propagation
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXcd apply_op_vec(const OperatorTerms& H, const Eigen::VectorXcd& v) {
    const Eigen::Index dim = v.size();
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        SpinConfig s{static_cast<std::uint32_t>(i), H.sites()};
        H.for_connected(s, [&](const SpinConfig& sp, cplx el) {
            out[i] += el * v[static_cast<Eigen::Index>(sp.index())];
        });
    }
    return out;
}

/// One Lanczos pass; returns false when tol was not reached within kmax.
bool krylov_try(const OperatorTerms& H, const Eigen::VectorXcd& v, cplx tau, double tol,
                int kmax, Eigen::VectorXcd& out) {
    const double vnorm = v.norm();
    if (vnorm == 0.0) {
        out = v;
        return true;
    }
    std::vector<Eigen::VectorXcd> basis{v / vnorm};
    std::vector<double> alpha, beta;
    for (int k = 0; k < kmax; ++k) {
        Eigen::VectorXcd w = apply_op_vec(H, basis[k]);
        const double a = std::real(basis[k].dot(w));
        alpha.push_back(a);
        w -= a * basis[k];
        if (k > 0) w -= beta[k - 1] * basis[k - 1];
        for (const auto& u : basis) w -= u.dot(w) * u;
        const double b = w.norm();

        const int kk = k + 1;
        Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(kk, kk);
        for (int i = 0; i < kk; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < kk) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        const Eigen::MatrixXcd E = expm_dense(tau * T);
        const double err = (kk > 1) ? std::abs(b * E(kk - 1, 0)) : b * std::abs(tau);
        if (err < tol || b < 1e-14) {
            out = Eigen::VectorXcd::Zero(v.size());
            for (int i = 0; i < kk; ++i) out += (vnorm * E(i, 0)) * basis[i];
            return true;
        }
        beta.push_back(b);
        basis.push_back(w / b);
    }
    return false;
}

} // namespace

Eigen::VectorXcd krylov_expm_multiply(const OperatorTerms& H, Eigen::VectorXcd v, cplx tau,
                                      double tol) {
    // Split tau until a 48-dim Krylov space reaches the per-substep tolerance.
    int substeps = 1;
    while (substeps <= 1 << 20) {
        Eigen::VectorXcd cur = v;
        const cplx sub_tau = tau / static_cast<double>(substeps);
        bool ok = true;
        for (int s = 0; s < substeps && ok; ++s) {
            Eigen::VectorXcd next;
            ok = krylov_try(H, cur, sub_tau, tol / substeps, 48, next);
            if (ok) cur = std::move(next);
        }
        if (ok) return cur;
        substeps *= 2;
    }
    throw NumericalError("krylov_expm_multiply: no convergence");
}

// ---------------------------------------------------------------------------
// Exact evolution oracle
// ---------------------------------------------------------------------------

ExactEvolver::ExactEvolver(const OperatorTerms& H) : H_(H) {
    if (H.sites() > kMaxKrylovSites)
        throw NumericalError("exact evolution: beyond the 2^16 cap");
    dense_ = H.sites() <= kMaxDenseSites;
    if (dense_) {
        SpectralDecomposition sd = diagonalize(H);
        evecs_ = std::move(sd.eigenvectors);
        evals_ = std::move(sd.eigenvalues);
    }
}

AmplitudeState ExactEvolver::at(const AmplitudeState& psi0, double t) const {
    if (psi0.n != H_.sites()) throw ValidationError("exact evolution: shape mismatch");
    Eigen::VectorXcd out;
    if (dense_) {
        Eigen::VectorXcd coeffs = evecs_.transpose() * psi0.amplitudes;
        for (Eigen::Index k = 0; k < coeffs.size(); ++k)
            coeffs[k] *= std::exp(cplx(0.0, -evals_[k] * t));
        out = evecs_ * coeffs;
    } else {
        out = krylov_expm_multiply(H_, psi0.amplitudes, cplx(0.0, -t), 1e-12);
    }
    const double drift = std::abs(out.norm() - psi0.amplitudes.norm());
    if (drift > 1e-10 * psi0.amplitudes.norm())
        throw NumericalError("exact evolution: norm drift beyond 1e-10");
    return {psi0.n, std::move(out), "exact@t"};
}

std::vector<AmplitudeState> ExactEvolver::series(const AmplitudeState& psi0,
                                                 const std::vector<double>& times) const {
    std::vector<AmplitudeState> out;
    out.reserve(times.size());
    if (dense_) {
        for (double t : times) out.push_back(at(psi0, t));
        return out;
    }
    // Krylov mode: sequential increments.
    AmplitudeState cur = psi0;
    double t_cur = 0.0;
    for (double t : times) {
        if (t < t_cur) throw ValidationError("exact evolution series: times must ascend");
        if (t > t_cur) {
            Eigen::VectorXcd next =
                krylov_expm_multiply(H_, cur.amplitudes, cplx(0.0, -(t - t_cur)), 1e-12);
            cur = AmplitudeState(psi0.n, std::move(next), "exact@t");
            t_cur = t;
        }
        out.push_back(cur);
    }
    return out;
}

AmplitudeState exact_evolve(const OperatorTerms& H, const AmplitudeState& psi0, double t) {
    return ExactEvolver(H).at(psi0, t);
}

// ---------------------------------------------------------------------------
// Scheme application to states
// ---------------------------------------------------------------------------

AmplitudeState apply_scheme_step(const SchemeSpec& scheme, const OperatorTerms& H,
                                 const AmplitudeState& psi, double delta) {
    if (psi.n != H.sites()) throw ValidationError("scheme step: shape mismatch");
    const cplx mi(0.0, -1.0);
    Eigen::VectorXcd v = psi.amplitudes;

    auto diag_phase = [&H](Eigen::VectorXcd& w, cplx factor) {
        const OperatorTerms d = H.diagonal_part();
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            SpinConfig s{static_cast<std::uint32_t>(i), H.sites()};
            w[i] *= std::exp(factor * d.diagonal_element(s));
        }
    };

    switch (scheme.kind) {
        case SchemeKind::exact:
            v = krylov_expm_multiply(H, v, mi * delta, 1e-13);
            break;
        case SchemeKind::taylor: {
            Eigen::VectorXcd sum = v, term = v;
            for (int j = 1; j <= scheme.order; ++j) {
                term = apply_op_vec(H, term) * (mi * delta / static_cast<double>(j));
                sum += term;
            }
            v = std::move(sum);
            break;
        }
        case SchemeKind::lpe:
            for (const cplx& ak : scheme.a) v += mi * ak * delta * apply_op_vec(H, v);
            break;
        case SchemeKind::slpe: {
            const OperatorTerms offdiag = H.offdiagonal_part();
            // Factors act right to left: the k-th diagonal exponential first,
            // then the k-th off-diagonal linear factor, from k = s down to 1.
            for (std::size_t k = scheme.a.size(); k-- > 0;) {
                diag_phase(v, mi * scheme.b[k] * delta);
                v += mi * scheme.a[k] * delta * apply_op_vec(offdiag, v);
            }
            break;
        }
        case SchemeKind::trotter2: {
            const OperatorTerms offdiag = H.offdiagonal_part();
            diag_phase(v, mi * (delta / 2.0));
            v = krylov_expm_multiply(offdiag, v, mi * delta, 1e-13);
            diag_phase(v, mi * (delta / 2.0));
            break;
        }
    }
    return {psi.n, std::move(v), scheme.name()};
}

// ---------------------------------------------------------------------------
// Basis generation
// ---------------------------------------------------------------------------

NoiseSpec NoiseSpec::parse(const std::string& text) {
    NoiseSpec n;
    if (text == "none" || text.empty()) return n;
    if (text.rfind("g:", 0) == 0) {
        n.kind = Kind::gaussian;
        try {
            n.eps = std::stod(text.substr(2));
        } catch (const std::exception&) {
            throw ValidationError("bad noise eps: " + text);
        }
        if (n.eps < 0.0) throw ValidationError("noise eps must be >= 0");
        return n;
    }
    throw ValidationError("unknown noise spec: " + text + " (want none or g:<eps>)");
}

std::string NoiseSpec::describe() const {
    if (kind == Kind::none) return "none";
    std::ostringstream ss;
    ss << "gaussian(" << eps << ",seed=" << seed << ")";
    return ss.str();
}

GeneratedBasis generate_basis(const OperatorTerms& H, const AmplitudeState& psi0,
                              double delta, int steps, const SchemeSpec& scheme,
                              const NoiseSpec& noise) {
    if (steps < 1) throw ValidationError("generate_basis: steps must be >= 1");
    if (noise.eps < 0.0) throw ValidationError("generate_basis: noise eps must be >= 0");

    const ExactEvolver evolver(H);
    Rng noise_rng(noise.seed);

    std::vector<AmplitudeState> members;
    members.push_back(normalized(psi0));
    for (int k = 1; k <= steps; ++k) {
        AmplitudeState next =
            scheme.kind == SchemeKind::exact
                ? evolver.at(members.back(), delta)
                : apply_scheme_step(scheme, H, members.back(), delta);
        next.amplitudes /= next.amplitudes.norm();
        if (noise.kind == NoiseSpec::Kind::gaussian && noise.eps > 0.0) {
            Eigen::VectorXcd g(next.amplitudes.size());
            for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = noise_rng.gaussian_cplx();
            next.amplitudes += noise.eps * (g / g.norm());
            next.amplitudes /= next.amplitudes.norm();
        }
        next.label = scheme.name() + "@" + std::to_string(k);
        members.push_back(std::move(next));
    }

    GeneratedBasis out;
    out.report.scheme = scheme.name();
    out.report.noise = noise.describe();
    for (int k = 0; k <= steps; ++k) out.report.times.push_back(k * delta);
    const auto exact_states = evolver.series(members.front(), out.report.times);
    for (std::size_t k = 0; k < members.size(); ++k)
        out.report.infidelity_vs_exact.push_back(1.0 - fidelity(members[k], exact_states[k]));
    out.family = BasisFamily(std::move(members));
    return out;
}

} // namespace detspace
