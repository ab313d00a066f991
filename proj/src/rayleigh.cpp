#include "detspace/rayleigh.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "detspace/xprec.hpp"

namespace detspace {

const Eigen::MatrixXcd& GramPack::op(const std::string& label) const {
    auto it = G_ops.find(label);
    if (it == G_ops.end()) throw ValidationError("GramPack: no operator labeled " + label);
    return it->second;
}

const xp::Matrix* GramPack::op_xp(const std::string& label) const {
    auto it = G_ops_xp.find(label);
    return it == G_ops_xp.end() ? nullptr : it->second.get();
}

std::string AssemblyPolicy::describe() const {
    std::ostringstream ss;
    switch (kind) {
        case Kind::direct_mean: ss << "direct-mean"; break;
        case Kind::xp_inverse: ss << "xp-inverse:" << digits; break;
        case Kind::pinv: ss << "pinv:" << rcond; break;
    }
    return ss.str();
}

AssemblyPolicy AssemblyPolicy::parse(const std::string& text) {
    AssemblyPolicy p;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (head == "xp" || head == "xp-inverse") {
            p.kind = Kind::xp_inverse;
            if (!arg.empty()) p.digits = std::stoi(arg);
        } else if (head == "pinv") {
            p.kind = Kind::pinv;
            if (!arg.empty()) p.rcond = std::stod(arg);
        } else if (head == "direct-mean") {
            p.kind = Kind::direct_mean;
        } else {
            throw ValidationError("unknown assembly policy: " + text);
        }
    } catch (const std::invalid_argument&) {
        throw ValidationError("bad assembly policy argument: " + text);
    }
    return p;
}

namespace {

Eigen::VectorXcd sorted_eigenvalues(const Eigen::MatrixXcd& M) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, /*computeEigenvectors=*/false);
    Eigen::VectorXcd ev = es.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(),
              [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
    return ev;
}

/// Mean of chain means plus per-entry standard error of the overall mean.
struct ChainAccumulator {
    std::vector<Eigen::MatrixXcd> chain_means;

    void add_chain(const Eigen::MatrixXcd& sum, long count) {
        if (count <= 0) throw NumericalError("estimator: a chain retained no usable samples");
        chain_means.push_back(sum / static_cast<double>(count));
    }

    Eigen::MatrixXcd mean() const {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(chain_means[0].rows(),
                                                      chain_means[0].cols());
        for (const auto& c : chain_means) acc += c;
        return acc / static_cast<double>(chain_means.size());
    }

    std::optional<Eigen::MatrixXd> std_err() const {
        const auto C = chain_means.size();
        if (C < 2) return std::nullopt;
        const Eigen::MatrixXcd mu = mean();
        Eigen::MatrixXd var = Eigen::MatrixXd::Zero(mu.rows(), mu.cols());
        for (const auto& c : chain_means) var += (c - mu).cwiseAbs2();
        var /= static_cast<double>(C - 1);
        return Eigen::MatrixXd((var / static_cast<double>(C)).cwiseSqrt());
    }
};

} // namespace

RayleighEstimate estimate_det_state(const BasisFamily& family, const OperatorTerms& H,
                                    const DetSamplerConfig& cfg, ImagPolicy imag) {
    if (family.sites() != H.sites())
        throw ValidationError("estimate_det_state: operator/family shape mismatch");
    const int m = family.size();
    SampleRun run = sample_chain(family, cfg);

    ChainAccumulator acc;
    long skipped = 0;
    for (const auto& chain : run.chains) {
        Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(m, m);
        long count = 0;
        for (const auto& s : chain.samples) {
            try {
                sum += local_rayleigh(family, H, s);
                ++count;
            } catch (const NumericalError&) {
                ++skipped;
            }
        }
        acc.add_chain(sum, count);
    }

    RayleighEstimate est;
    est.M = acc.mean();
    est.std_err = acc.std_err();
    est.eigenvalues = sorted_eigenvalues(est.M);
    est.assembly_policy = "direct-mean";
    est.imag_policy = ImagPolicy::keep;
    est.skipped_singular = skipped;
    est.sampler_json = run.diagnostics_json();
    if (imag == ImagPolicy::discard_eig_imag) est = realify_eigenvalues(est);
    return est;
}

RayleighEstimate exhaustive_det_state(const BasisFamily& family, const OperatorTerms& H,
                                      ImagPolicy imag) {
    const int m = family.size(), n = family.sites();
    if (n * m > 24)
        throw NumericalError("exhaustive_det_state: (2^n)^m enumeration too large");
    const std::size_t total = std::size_t(1) << (n * m);

    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(m, m);
    double weight_total = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        const MultiConfig s = MultiConfig::from_index(idx, m, n);
        const Eigen::MatrixXcd phi = overlap_matrix(family, s);
        const double w = std::norm(phi.determinant());
        if (w == 0.0) continue;
        sum += w * local_rayleigh(family, H, s);
        weight_total += w;
    }
    if (weight_total == 0.0)
        throw NumericalError("exhaustive_det_state: determinant state vanishes everywhere");

    RayleighEstimate est;
    est.M = sum / weight_total;
    est.eigenvalues = sorted_eigenvalues(est.M);
    est.assembly_policy = "exhaustive-mean";
    est.imag_policy = ImagPolicy::keep;
    if (imag == ImagPolicy::discard_eig_imag) est = realify_eigenvalues(est);
    return est;
}

// ---------------------------------------------------------------------------
// Sum-of-states estimator
// ---------------------------------------------------------------------------

namespace {

/// Per-configuration quantities shared by the sampled and exhaustive variants.
struct SosLocal {
    Eigen::VectorXcd a;     // a_k = <s|phi_k>
    double q = 0.0;         // sum_k |a_k|^2

    SosLocal(const BasisFamily& family, const SpinConfig& s) : a(family.size()) {
        for (int k = 0; k < family.size(); ++k)
            a[k] = family[k].amplitudes[static_cast<Eigen::Index>(s.index())];
        q = a.squaredNorm();
    }
};

struct SosSums {
    Eigen::MatrixXcd g;
    std::map<std::string, Eigen::MatrixXcd> ops;

    SosSums(int m, const std::map<std::string, OperatorTerms>& labels) {
        g = Eigen::MatrixXcd::Zero(m, m);
        for (const auto& [label, _] : labels) ops[label] = Eigen::MatrixXcd::Zero(m, m);
    }

    void accumulate(const BasisFamily& family,
                    const std::map<std::string, OperatorTerms>& labels,
                    const SpinConfig& s, double weight) {
        const SosLocal loc(family, s);
        if (loc.q == 0.0) return;   // zero target probability
        const double w = weight / loc.q;
        g.noalias() += w * (loc.a.conjugate() * loc.a.transpose());
        for (const auto& [label, op] : labels) {
            Eigen::VectorXcd b = Eigen::VectorXcd::Zero(family.size());
            op.for_connected(s, [&](const SpinConfig& sp, cplx v) {
                const auto idx = static_cast<Eigen::Index>(sp.index());
                for (int j = 0; j < family.size(); ++j)
                    b[j] += v * family[j].amplitudes[idx];
            });
            ops[label].noalias() += w * (loc.a.conjugate() * b.transpose());
        }
    }
};

class SosChain {
public:
    SosChain(const BasisFamily& family, std::uint64_t seed, int retries)
        : family_(family), rng_(seed), n_(family.sites()) {
        for (int t = 0; t < retries; ++t) {
            SpinConfig s{static_cast<std::uint32_t>(rng_.below(std::uint64_t(1) << n_)), n_};
            if (SosLocal(family_, s).q > 0.0) {
                cur_ = s;
                q_ = SosLocal(family_, s).q;
                return;
            }
        }
        throw NumericalError("sum-of-states sampler: no nonzero start found");
    }

    bool step() {
        SpinConfig prop = cur_.flipped(static_cast<int>(rng_.below(n_)));
        const double q_new = SosLocal(family_, prop).q;
        const bool accept = q_new > 0.0 && (q_new >= q_ || rng_.uniform() < q_new / q_);
        if (accept) {
            cur_ = prop;
            q_ = q_new;
        }
        return accept;
    }

    const SpinConfig& current() const { return cur_; }

private:
    const BasisFamily& family_;
    Rng rng_;
    int n_;
    SpinConfig cur_;
    double q_ = 0.0;
};

} // namespace

GramPack estimate_sum_of_states(const BasisFamily& family,
                                const std::map<std::string, OperatorTerms>& ops,
                                const DetSamplerConfig& cfg) {
    cfg.validate();
    const int m = family.size(), n = family.sites();

    ChainAccumulator g_acc;
    std::map<std::string, ChainAccumulator> op_acc;
    nlohmann::json sampler;
    sampler["chains"] = nlohmann::json::array();

    for (int c = 0; c < cfg.n_chains; ++c) {
        const std::uint64_t seed = derive_seed(cfg.seed, c);
        SosChain chain(family, seed, cfg.start_retries);
        long proposals = 0, accepted = 0;
        const long burn = cfg.effective_burn_in(n, 1);
        for (long b = 0; b < burn; ++b) {
            accepted += chain.step() ? 1 : 0;
            ++proposals;
        }
        SosSums sums(m, ops);
        for (int k = 0; k < cfg.n_samples_per_chain; ++k) {
            for (int t = 0; t < cfg.thin; ++t) {
                accepted += chain.step() ? 1 : 0;
                ++proposals;
            }
            sums.accumulate(family, ops, chain.current(), 1.0);
        }
        g_acc.add_chain(sums.g, cfg.n_samples_per_chain);
        for (auto& [label, mat] : sums.ops) op_acc[label].add_chain(mat, cfg.n_samples_per_chain);

        nlohmann::json e;
        e["seed"] = seed;
        e["proposals"] = proposals;
        e["acceptance_rate"] = proposals ? double(accepted) / double(proposals) : 0.0;
        e["samples"] = cfg.n_samples_per_chain;
        sampler["chains"].push_back(e);
    }

    GramPack pack;
    pack.G = g_acc.mean();
    pack.G_err = g_acc.std_err();
    for (auto& [label, acc] : op_acc) {
        pack.G_ops[label] = acc.mean();
        if (auto err = acc.std_err()) pack.G_ops_err[label] = *err;
    }
    pack.scale_known = false;
    pack.provenance = PackProvenance::sum_of_states;
    pack.sampler_json = sampler.dump(2);
    return pack;
}

GramPack exhaustive_sum_of_states(const BasisFamily& family,
                                  const std::map<std::string, OperatorTerms>& ops) {
    const int m = family.size(), n = family.sites();
    const std::size_t dim = std::size_t(1) << n;

    SosSums sums(m, ops);
    double q_total = 0.0;
    for (std::size_t idx = 0; idx < dim; ++idx) {
        const SpinConfig s{static_cast<std::uint32_t>(idx), n};
        const double q = SosLocal(family, s).q;
        q_total += q;
        sums.accumulate(family, ops, s, q);
    }
    if (q_total == 0.0)
        throw NumericalError("sum-of-states: family members are all zero");

    GramPack pack;
    pack.G = sums.g / q_total;
    for (auto& [label, mat] : sums.ops) pack.G_ops[label] = mat / q_total;
    pack.scale_known = false;
    pack.provenance = PackProvenance::sum_of_states;
    return pack;
}

namespace {

Eigen::MatrixXcd xp_to_eigen(const xp::Matrix& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out(i, j) = m.get(i, j);
    return out;
}

/// A^dag B with both factors given as dense double columns, accumulated in
/// extended precision (exact for the stored inputs).
xp::Matrix cross_gram_xp(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, int digits) {
    const int m = static_cast<int>(a.cols());
    xp::Matrix out(m, m, digits);
    const mpfr_prec_t bits = out.bits();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            xp::Complex acc(bits);
            for (Eigen::Index s = 0; s < a.rows(); ++s)
                acc += xp::Complex(a(s, i), bits).conj() * xp::Complex(b(s, j), bits);
            out.at(i, j) = std::move(acc);
        }
    return out;
}

} // namespace

GramPack exact_gram_pack(const BasisFamily& family,
                         const std::map<std::string, OperatorTerms>& ops, int xp_digits) {
    const int m = family.size();
    const Eigen::Index dim = family[0].amplitudes.size();
    Eigen::MatrixXcd A(dim, m);
    for (int j = 0; j < m; ++j) A.col(j) = family[j].amplitudes;

    GramPack pack;
    if (xp_digits > 0) {
        auto gx = std::make_shared<xp::Matrix>(cross_gram_xp(A, A, xp_digits));
        pack.G = xp_to_eigen(*gx);
        pack.G_xp = std::move(gx);
    } else {
        pack.G = A.adjoint() * A;
    }
    for (const auto& [label, op] : ops) {
        if (op.sites() != family.sites())
            throw ValidationError("exact_gram_pack: operator/family shape mismatch");
        if (xp_digits > 0) {
            // Both the operator application and the contraction run at the
            // extended precision; each is exact for the stored amplitudes.
            auto gox = std::make_shared<xp::Matrix>(m, m, xp_digits);
            const mpfr_prec_t bits = gox->bits();
            std::vector<xp::Complex> w;
            w.reserve(dim);
            for (int j = 0; j < m; ++j) {
                w.clear();
                for (Eigen::Index s = 0; s < dim; ++s) {
                    xp::Complex acc(bits);
                    op.for_connected(SpinConfig{static_cast<std::uint32_t>(s), op.sites()},
                                     [&](const SpinConfig& sp, cplx v) {
                                         acc += xp::Complex(v, bits) *
                                                xp::Complex(A(sp.index(), j), bits);
                                     });
                    w.push_back(std::move(acc));
                }
                for (int i = 0; i < m; ++i) {
                    xp::Complex acc(bits);
                    for (Eigen::Index s = 0; s < dim; ++s)
                        acc += xp::Complex(A(s, i), bits).conj() * w[s];
                    gox->at(i, j) = std::move(acc);
                }
            }
            pack.G_ops[label] = xp_to_eigen(*gox);
            pack.G_ops_xp[label] = std::move(gox);
        } else {
            Eigen::MatrixXcd B(dim, m);
            for (int j = 0; j < m; ++j) B.col(j) = apply_operator(op, family[j]).amplitudes;
            pack.G_ops[label] = A.adjoint() * B;
        }
    }
    pack.scale_known = true;
    pack.provenance = PackProvenance::exact;

    const double scale = pack.G.cwiseAbs().maxCoeff();
    if ((pack.G - pack.G.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, scale))
        throw NumericalError("exact_gram_pack: Gram matrix failed the Hermiticity check");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pack.G, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, scale))
        throw NumericalError("exact_gram_pack: Gram matrix is not positive semidefinite");
    return pack;
}

RayleighEstimate assemble_rayleigh(const GramPack& pack, const AssemblyPolicy& policy,
                                   const std::string& op_label, ImagPolicy imag) {
    const Eigen::MatrixXcd& gh = pack.op(op_label);
    RayleighEstimate est;
    est.assembly_policy = policy.describe();

    switch (policy.kind) {
        case AssemblyPolicy::Kind::direct_mean:
            throw ValidationError(
                "direct-mean applies to the determinant-state estimator, not to packs");
        case AssemblyPolicy::Kind::xp_inverse: {
            const int m = pack.m();
            const xp::Matrix* gh_xp = pack.op_xp(op_label);
            xp::Matrix gx = pack.G_xp
                                ? *pack.G_xp
                                : xp::Matrix::from_eigen_rowmajor(
                                      Eigen::MatrixXcd(pack.G.transpose()).data(), m, m,
                                      policy.digits);
            xp::Matrix bx = gh_xp ? *gh_xp
                                  : xp::Matrix::from_eigen_rowmajor(
                                        Eigen::MatrixXcd(gh.transpose()).data(), m, m,
                                        policy.digits);
            auto mx = std::make_shared<xp::Matrix>(xp::solve(gx, bx));
            est.M.resize(m, m);
            const auto vals = mx->to_doubles_rowmajor();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) est.M(i, j) = vals[std::size_t(i) * m + j];
            est.M_xp = std::move(mx);
            break;
        }
        case AssemblyPolicy::Kind::pinv: {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
                pack.G, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const auto& sv = svd.singularValues();
            Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
            for (Eigen::Index k = 0; k < sv.size(); ++k)
                if (sv[k] > policy.rcond * sv[0]) inv[k] = 1.0 / sv[k];
            est.M = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint() * gh;
            break;
        }
    }
    est.eigenvalues = sorted_eigenvalues(est.M);
    est.imag_policy = ImagPolicy::keep;
    if (pack.G_err)
        est.notes.push_back("pack standard errors are not propagated through the inverse");
    if (imag == ImagPolicy::discard_eig_imag) est = realify_eigenvalues(est);
    return est;
}

RayleighEstimate realify_eigenvalues(const RayleighEstimate& est) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(est.M);
    if (es.info() != Eigen::Success)
        throw NumericalError("realify_eigenvalues: eigendecomposition failed");
    const Eigen::MatrixXcd& P = es.eigenvectors();

    RayleighEstimate out = est;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(P);
    const double cond =
        svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    if (!std::isfinite(cond) || cond > 1e12) {
        out.notes.push_back("realify: eigenbasis condition " + std::to_string(cond) +
                            "; result may be inaccurate");
    }
    Eigen::VectorXcd d = es.eigenvalues().real().cast<cplx>();
    out.M = P * d.asDiagonal() * P.inverse();
    out.eigenvalues = sorted_eigenvalues(out.M);
    out.imag_policy = ImagPolicy::discard_eig_imag;
    out.M_xp.reset();   // eigen post-processing runs in double precision
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

nlohmann::json cmat_to_json(const Eigen::MatrixXcd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXcd cmat_from_json(const nlohmann::json& rows) {
    const auto r = rows.size();
    if (r == 0) throw ValidationError("JSON matrix: empty");
    const auto c = rows[0].size();
    Eigen::MatrixXcd m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            m(i, j) = cplx(rows[i][j][0].get<double>(), rows[i][j][1].get<double>());
    return m;
}

nlohmann::json rmat_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd rmat_from_json(const nlohmann::json& rows) {
    const auto r = rows.size();
    const auto c = rows.empty() ? 0 : rows[0].size();
    Eigen::MatrixXd m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

} // namespace

std::string rayleigh_to_json(const RayleighEstimate& est) {
    nlohmann::json j;
    j["m"] = est.m();
    j["matrix"] = cmat_to_json(est.M);
    if (est.M_xp) {
        nlohmann::json xp_entries = nlohmann::json::array();
        for (int i = 0; i < est.M_xp->rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int k = 0; k < est.M_xp->cols(); ++k)
                row.push_back({est.M_xp->at(i, k).re.to_string(),
                               est.M_xp->at(i, k).im.to_string()});
            xp_entries.push_back(row);
        }
        j["matrix_xp"] = {{"digits", est.M_xp->digits()}, {"entries", xp_entries}};
    }
    if (est.std_err) j["std_err"] = rmat_to_json(*est.std_err);
    nlohmann::json ev = nlohmann::json::array();
    for (Eigen::Index k = 0; k < est.eigenvalues.size(); ++k)
        ev.push_back({est.eigenvalues[k].real(), est.eigenvalues[k].imag()});
    j["eigenvalues"] = ev;
    j["assembly_policy"] = est.assembly_policy;
    j["imag_policy"] = est.imag_policy == ImagPolicy::keep ? "keep" : "discard-eig-imag";
    j["skipped_singular"] = est.skipped_singular;
    j["notes"] = est.notes;
    if (!est.sampler_json.empty()) j["sampler"] = nlohmann::json::parse(est.sampler_json);
    return j.dump(2);
}

RayleighEstimate rayleigh_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("rayleigh JSON: ") + e.what());
    }
    RayleighEstimate est;
    est.M = cmat_from_json(j.at("matrix"));
    if (j.contains("matrix_xp")) {
        const auto& jx = j["matrix_xp"];
        const int digits = jx.at("digits").get<int>();
        const auto& entries = jx.at("entries");
        const int rows = static_cast<int>(entries.size());
        const int cols = rows ? static_cast<int>(entries[0].size()) : 0;
        auto mx = std::make_shared<xp::Matrix>(rows, cols, digits);
        const mpfr_prec_t bits = mx->bits();
        for (int i = 0; i < rows; ++i)
            for (int k = 0; k < cols; ++k)
                mx->at(i, k) = xp::Complex(
                    xp::Real::from_string(entries[i][k][0].get<std::string>(), bits),
                    xp::Real::from_string(entries[i][k][1].get<std::string>(), bits));
        est.M_xp = std::move(mx);
    }
    if (j.contains("std_err")) est.std_err = rmat_from_json(j["std_err"]);
    if (j.contains("eigenvalues")) {
        const auto& ev = j["eigenvalues"];
        est.eigenvalues.resize(ev.size());
        for (std::size_t k = 0; k < ev.size(); ++k)
            est.eigenvalues[k] = cplx(ev[k][0].get<double>(), ev[k][1].get<double>());
    }
    est.assembly_policy = j.value("assembly_policy", "");
    est.imag_policy = j.value("imag_policy", "keep") == std::string("keep")
                          ? ImagPolicy::keep
                          : ImagPolicy::discard_eig_imag;
    est.skipped_singular = j.value("skipped_singular", 0L);
    if (j.contains("notes")) est.notes = j["notes"].get<std::vector<std::string>>();
    if (j.contains("sampler")) est.sampler_json = j["sampler"].dump();
    return est;
}

std::string pack_to_json(const GramPack& pack) {
    nlohmann::json j;
    j["m"] = pack.m();
    j["scale_known"] = pack.scale_known;
    j["provenance"] = pack.provenance == PackProvenance::exact ? "exact" : "sum-of-states";
    j["G"] = cmat_to_json(pack.G);
    j["G_ops"] = nlohmann::json::object();
    for (const auto& [label, mat] : pack.G_ops) j["G_ops"][label] = cmat_to_json(mat);
    if (pack.G_err) j["G_err"] = rmat_to_json(*pack.G_err);
    for (const auto& [label, mat] : pack.G_ops_err)
        j["G_ops_err"][label] = rmat_to_json(mat);
    if (!pack.sampler_json.empty()) j["sampler"] = nlohmann::json::parse(pack.sampler_json);
    return j.dump(2);
}

GramPack pack_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("pack JSON: ") + e.what());
    }
    GramPack pack;
    pack.G = cmat_from_json(j.at("G"));
    pack.scale_known = j.value("scale_known", false);
    pack.provenance = j.value("provenance", "exact") == std::string("exact")
                          ? PackProvenance::exact
                          : PackProvenance::sum_of_states;
    if (j.contains("G_ops"))
        for (const auto& [label, mat] : j["G_ops"].items())
            pack.G_ops[label] = cmat_from_json(mat);
    if (j.contains("G_err")) pack.G_err = rmat_from_json(j["G_err"]);
    if (j.contains("G_ops_err"))
        for (const auto& [label, mat] : j["G_ops_err"].items())
            pack.G_ops_err[label] = rmat_from_json(mat);
    if (j.contains("sampler")) pack.sampler_json = j["sampler"].dump();
    return pack;
}

} // namespace detspace
