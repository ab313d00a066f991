#include "detspace/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace detspace {

namespace {

/// Thin orthonormal basis of the family's column span; throws on rank loss.
Eigen::MatrixXcd orthonormal_columns(const BasisFamily& fam) {
    const int m = fam.size();
    const Eigen::Index dim = fam[0].amplitudes.size();
    Eigen::MatrixXcd A(dim, m);
    for (int j = 0; j < m; ++j) A.col(j) = fam[j].amplitudes;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
    const Eigen::MatrixXcd R =
        qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
    const double scale = R.cwiseAbs().maxCoeff();
    for (int k = 0; k < m; ++k) {
        if (std::abs(R(k, k)) < 1e-12 * scale)
            throw NumericalError("subspace distance: rank-deficient family");
    }
    Eigen::MatrixXcd Q = Eigen::MatrixXcd::Identity(dim, m);
    Q = qr.householderQ() * Q;
    return Q;
}

} // namespace

double subspace_distance_exact(const BasisFamily& U, const BasisFamily& V) {
    if (U.size() != V.size())
        throw ValidationError("subspace distance: families must have equal size");
    if (U.sites() != V.sites())
        throw ValidationError("subspace distance: families must share the site count");
    const Eigen::MatrixXcd Qu = orthonormal_columns(U);
    const Eigen::MatrixXcd Qv = orthonormal_columns(V);
    const Eigen::MatrixXcd S = Qu.adjoint() * Qv;
    const double fid = std::clamp(std::norm(S.determinant()), 0.0, 1.0);
    return std::acos(std::sqrt(fid));
}

namespace {

/// det(Phi_num(s)) / det(Phi_den(s)) computed as det of a solve, which keeps
/// the common m!-scale factors out entirely.
cplx det_ratio(const BasisFamily& num, const BasisFamily& den, const MultiConfig& s) {
    const Eigen::MatrixXcd phi_den = overlap_matrix(den, s);
    const Eigen::MatrixXcd phi_num = overlap_matrix(num, s);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(phi_den);
    return lu.solve(phi_num).determinant();
}

struct MeanWithSpread {
    cplx mean{0.0, 0.0};
    double var = 0.0;   // variance of the mean (re + im), from chain means

    static MeanWithSpread from_chains(const std::vector<cplx>& chain_means) {
        MeanWithSpread r;
        for (const auto& c : chain_means) r.mean += c;
        r.mean /= static_cast<double>(chain_means.size());
        if (chain_means.size() > 1) {
            double acc = 0.0;
            for (const auto& c : chain_means) acc += std::norm(c - r.mean);
            r.var = acc / static_cast<double>(chain_means.size() - 1) /
                    static_cast<double>(chain_means.size());
        }
        return r;
    }
};

MeanWithSpread cross_ratio_mean(const BasisFamily& sample_from, const BasisFamily& other,
                                const DetSamplerConfig& cfg) {
    SampleRun run = sample_chain(sample_from, cfg);
    std::vector<cplx> chain_means;
    for (const auto& chain : run.chains) {
        cplx acc = 0.0;
        for (const auto& s : chain.samples) acc += det_ratio(other, sample_from, s);
        chain_means.push_back(acc / static_cast<double>(chain.samples.size()));
    }
    return MeanWithSpread::from_chains(chain_means);
}

} // namespace

DistanceEstimate subspace_distance_mc(const BasisFamily& U, const BasisFamily& V,
                                      const DetSamplerConfig& cfg, bool control_variates) {
    if (control_variates)
        throw NumericalError("subspace_distance_mc: control variates are not implemented");
    if (U.size() != V.size() || U.sites() != V.sites())
        throw ValidationError("subspace distance: family shapes must match");

    DetSamplerConfig cfg_u = cfg;
    DetSamplerConfig cfg_v = cfg;
    cfg_u.seed = derive_seed(cfg.seed, 0xAu);
    cfg_v.seed = derive_seed(cfg.seed, 0xBu);
    const MeanWithSpread eu = cross_ratio_mean(U, V, cfg_u);
    const MeanWithSpread ev = cross_ratio_mean(V, U, cfg_v);

    const cplx prod = eu.mean * ev.mean;
    const double fid_raw = std::abs(prod);
    const double fid = std::clamp(fid_raw, 0.0, 1.0);

    DistanceEstimate out;
    out.fidelity = fid_raw;
    out.distance = std::acos(std::sqrt(fid));
    // Delta method through f -> arccos(sqrt(f)); the derivative blows up at the
    // endpoints, so the slope is floored there.
    const double var_prod = std::norm(ev.mean) * eu.var + std::norm(eu.mean) * ev.var;
    const double denom = std::max(2.0 * std::sqrt(fid * (1.0 - fid)), 1e-8);
    out.std_err = std::sqrt(var_prod) / denom;
    return out;
}

// ---------------------------------------------------------------------------
// Ritz spectra
// ---------------------------------------------------------------------------

namespace {

struct Whitening {
    Eigen::MatrixXcd half_inv;   // G^{-1/2}
    Eigen::MatrixXcd half;       // G^{+1/2}
};

Whitening whiten_gram(const Eigen::MatrixXcd& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
    if (es.info() != Eigen::Success)
        throw NumericalError("ritz: Gram eigendecomposition failed");
    const auto& lam = es.eigenvalues();
    const double lmax = lam.maxCoeff();
    if (lmax <= 0.0 || lam.minCoeff() < 1e-14 * lmax)
        throw NumericalError("ritz: singular Gram matrix under the exact policy");
    Eigen::VectorXd inv_sqrt = lam.cwiseSqrt().cwiseInverse();
    Eigen::VectorXd sqrt_lam = lam.cwiseSqrt();
    Whitening w;
    w.half_inv = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
    w.half = es.eigenvectors() * sqrt_lam.asDiagonal() * es.eigenvectors().adjoint();
    return w;
}

RitzResult ritz_from_whitened(const Eigen::MatrixXcd& half_inv, const Eigen::MatrixXcd& GH) {
    const Eigen::MatrixXcd W = half_inv * GH * half_inv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es((W + W.adjoint()) / 2.0);
    RitzResult r;
    r.values = es.eigenvalues();
    r.vectors = half_inv * es.eigenvectors();
    r.values_imag_residual = Eigen::VectorXd::Zero(r.values.size());
    return r;
}

} // namespace

RitzResult ritz_spectrum(const GramPack& pack, const std::string& op_label) {
    const Whitening w = whiten_gram(pack.G);
    return ritz_from_whitened(w.half_inv, pack.op(op_label));
}

RitzResult ritz_spectrum(const RayleighEstimate& est) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(est.M);
    if (es.info() != Eigen::Success)
        throw NumericalError("ritz: eigendecomposition of the estimate failed");
    const int m = est.m();
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    const auto& ev = es.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&ev](int a, int b) { return ev[a].real() < ev[b].real(); });
    RitzResult r;
    r.values.resize(m);
    r.values_imag_residual.resize(m);
    r.vectors.resize(m, m);
    for (int k = 0; k < m; ++k) {
        r.values[k] = ev[order[k]].real();
        r.values_imag_residual[k] = std::abs(ev[order[k]].imag());
        r.vectors.col(k) = es.eigenvectors().col(order[k]);
    }
    return r;
}

Eigen::VectorXd ritz_observable(const GramPack& pack, const std::string& hamiltonian_label,
                                const std::string& observable_label) {
    const Whitening w = whiten_gram(pack.G);
    const RitzResult ritz = ritz_from_whitened(w.half_inv, pack.op(hamiltonian_label));

    const int m = static_cast<int>(ritz.values.size());
    const double scale = std::max(1.0, ritz.values.cwiseAbs().maxCoeff());
    for (int k = 0; k + 1 < m; ++k) {
        if (ritz.values[k + 1] - ritz.values[k] <= 1e-10 * scale)
            throw ValidationError(
                "ritz_observable: degenerate Ritz values; use the direct ratio "
                "a^dag G^(A) a / a^dag G a instead");
    }

    // P^{-1} (G^{-1} G^(A)) P, diagonal entries. In the whitened frame P maps
    // to a unitary, so the inverse is an adjoint.
    const Eigen::MatrixXcd WA = w.half_inv * pack.op(observable_label) * w.half_inv;
    const Eigen::MatrixXcd Pw = w.half * ritz.vectors;    // unitary columns
    Eigen::VectorXd out(m);
    for (int k = 0; k < m; ++k)
        out[k] = (Pw.col(k).adjoint() * WA * Pw.col(k)).value().real();
    return out;
}

// ---------------------------------------------------------------------------
// Ground-state interpolation
// ---------------------------------------------------------------------------

GroundInterpolator::GroundInterpolator(GramPack pack, std::vector<std::string> part_labels,
                                       int refine_digits)
    : pack_(std::move(pack)),
      part_labels_(std::move(part_labels)),
      refine_digits_(refine_digits) {
    if (part_labels_.empty()) throw ValidationError("interpolator: no parts");
    for (const auto& label : part_labels_) pack_.op(label);   // existence check
    const Whitening w = whiten_gram(pack_.G);
    whitener_ = w.half_inv;
    whitener_inv_ = w.half;
}

namespace {

xp::Matrix lift_to_xp(const Eigen::MatrixXcd& m, int digits) {
    return xp::Matrix::from_eigen_rowmajor(Eigen::MatrixXcd(m.transpose()).data(),
                                           static_cast<int>(m.rows()),
                                           static_cast<int>(m.cols()), digits);
}

} // namespace

InterpolationResult GroundInterpolator::at(const std::vector<double>& gamma) const {
    if (gamma.size() != part_labels_.size())
        throw ValidationError("interpolator: gamma length must match the part count");
    const int m = pack_.m();
    Eigen::MatrixXcd GH = Eigen::MatrixXcd::Zero(m, m);
    for (std::size_t p = 0; p < gamma.size(); ++p)
        GH += gamma[p] * pack_.op(part_labels_[p]);
    const RitzResult r = ritz_from_whitened(whitener_, GH);

    InterpolationResult out;
    out.gamma = gamma;
    out.mu0 = r.values[0];
    out.alpha = r.vectors.col(0);

    if (refine_digits_ > 0) {
        // Shifted inverse iteration on the pencil (G^H, G): the double shift
        // mu0 is close but not equal to the extended-precision eigenvalue, so
        // the solve amplifies exactly the wanted direction.
        try {
            const xp::Matrix gx = pack_.G_xp ? *pack_.G_xp : lift_to_xp(pack_.G, refine_digits_);
            const xp::Matrix ghx = lift_to_xp(GH, refine_digits_);
            const xp::Matrix pencil =
                ghx - gx.scaled(xp::Complex(cplx(out.mu0, 0.0), gx.bits()));
            xp::Matrix alpha = lift_to_xp(out.alpha, refine_digits_);
            for (int it = 0; it < 2; ++it) {
                alpha = xp::solve(pencil, gx * alpha);
                xp::Real nrm = alpha.frobenius_norm();
                for (int i = 0; i < m; ++i)
                    alpha.at(i, 0) = xp::Complex(alpha.at(i, 0).re / nrm,
                                                 alpha.at(i, 0).im / nrm);
            }
            // Rayleigh quotient at working precision.
            xp::Matrix gha = ghx * alpha;
            xp::Matrix ga = gx * alpha;
            xp::Complex num(gx.bits()), den(gx.bits());
            for (int i = 0; i < m; ++i) {
                num += alpha.at(i, 0).conj() * gha.at(i, 0);
                den += alpha.at(i, 0).conj() * ga.at(i, 0);
            }
            out.mu0 = (num / den).to_cplx().real();
            for (int i = 0; i < m; ++i) out.alpha[i] = alpha.get(i, 0);
        } catch (const NumericalError&) {
            // Shift landed on the eigenvalue to working precision: the
            // unrefined vector is already as good as it gets.
        }
    }

    out.norm2 = (out.alpha.adjoint() * pack_.G * out.alpha).value().real();
    return out;
}

GramPack merge_part_packs(const std::vector<GramPack>& packs,
                          const std::vector<std::string>& part_labels) {
    if (packs.empty() || packs.size() != part_labels.size())
        throw ValidationError("merge_part_packs: need one pack per part label");
    GramPack merged = packs.front();
    merged.G_ops.clear();
    for (std::size_t p = 0; p < packs.size(); ++p) {
        if (packs[p].provenance != merged.provenance ||
            packs[p].scale_known != merged.scale_known)
            throw ValidationError("merge_part_packs: mixed scale conventions rejected");
        const double scale = merged.G.cwiseAbs().maxCoeff();
        if ((packs[p].G - merged.G).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ValidationError(
                "merge_part_packs: packs disagree on G; they must come from one run");
        merged.G_ops[part_labels[p]] = packs[p].op("H");
    }
    return merged;
}

} // namespace detspace
