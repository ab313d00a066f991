#include "detspace/det_state.hpp"

#include <cmath>
#include <atomic>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace detspace {

std::size_t MultiConfig::index() const {
    int bits = 0;
    for (const auto& c : copies) bits += c.n;
    if (bits > 63)
        throw ValidationError("MultiConfig::index: n*m exceeds the 63-bit index range");
    std::size_t idx = 0;
    for (int i = m() - 1; i >= 0; --i) {
        idx = (idx << copies[i].n) | copies[i].index();
    }
    return idx;
}

MultiConfig MultiConfig::from_index(std::size_t idx, int m, int n) {
    if (n * m > 63)
        throw ValidationError("MultiConfig::from_index: n*m exceeds the 63-bit index range");
    MultiConfig s;
    s.copies.reserve(m);
    const std::size_t mask = (std::size_t(1) << n) - 1;
    for (int i = 0; i < m; ++i) {
        s.copies.push_back({static_cast<std::uint32_t>(idx & mask), n});
        idx >>= n;
    }
    return s;
}

void DetSamplerConfig::validate() const {
    if (n_chains < 1 || n_samples_per_chain < 1)
        throw ValidationError("sampler: chain and sample counts must be >= 1");
    if (burn_in < -1 || thin < 0)
        throw ValidationError("sampler: burn_in must be >= 0 (or -1 for default), thin >= 0");
    if (start_retries < 1) throw ValidationError("sampler: start_retries must be >= 1");
}

std::size_t SampleRun::total_samples() const {
    std::size_t t = 0;
    for (const auto& c : chains) t += c.samples.size();
    return t;
}

std::string SampleRun::diagnostics_json() const {
    nlohmann::json j;
    j["chains"] = nlohmann::json::array();
    for (const auto& c : chains) {
        nlohmann::json e;
        e["seed"] = c.stats.seed;
        e["proposals"] = c.stats.proposals;
        e["accepted"] = c.stats.accepted;
        e["acceptance_rate"] = c.stats.acceptance_rate();
        e["restarts"] = c.stats.restarts;
        e["samples"] = c.samples.size();
        j["chains"].push_back(e);
    }
    return j.dump(2);
}

Eigen::MatrixXcd overlap_matrix(const BasisFamily& family, const MultiConfig& s) {
    const int m = family.size();
    if (s.m() != m) throw ValidationError("det state: family size and copy count differ");
    Eigen::MatrixXcd phi(m, m);
    for (int i = 0; i < m; ++i) {
        if (s.copies[i].n != family.sites())
            throw ValidationError("det state: copy site count mismatch");
        const auto idx = static_cast<Eigen::Index>(s.copies[i].index());
        for (int j = 0; j < m; ++j) phi(i, j) = family[j].amplitudes[idx];
    }
    return phi;
}

cplx det_amplitude(const BasisFamily& family, const MultiConfig& s) {
    const Eigen::MatrixXcd phi = overlap_matrix(family, s);
    const double mfact = std::tgamma(static_cast<double>(family.size()) + 1.0);
    return phi.determinant() / mfact;
}

namespace {

double log_abs_or_minus_inf(double a) {
    return a == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(a);
}

double log_abs_det(const Eigen::MatrixXcd& phi) {
    // Closed forms for the tiny sizes the sampler hammers on.
    switch (phi.rows()) {
        case 1:
            return log_abs_or_minus_inf(std::abs(phi(0, 0)));
        case 2:
            return log_abs_or_minus_inf(
                std::abs(phi(0, 0) * phi(1, 1) - phi(0, 1) * phi(1, 0)));
        case 3:
            return log_abs_or_minus_inf(
                std::abs(phi(0, 0) * (phi(1, 1) * phi(2, 2) - phi(1, 2) * phi(2, 1)) -
                         phi(0, 1) * (phi(1, 0) * phi(2, 2) - phi(1, 2) * phi(2, 0)) +
                         phi(0, 2) * (phi(1, 0) * phi(2, 1) - phi(1, 1) * phi(2, 0))));
        default:
            break;
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(phi);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        const double a = std::abs(lu.matrixLU()(i, i));
        if (a == 0.0) return -std::numeric_limits<double>::infinity();
        acc += std::log(a);
    }
    return acc;
}

} // namespace

double log_abs_det_overlap(const BasisFamily& family, const MultiConfig& s) {
    return log_abs_det(overlap_matrix(family, s));
}

BasisFamily change_basis(const BasisFamily& family, const Eigen::MatrixXcd& B) {
    const int m = family.size();
    if (B.rows() != m || B.cols() != m)
        throw ValidationError("change_basis: B must be m x m");
    std::vector<AmplitudeState> out;
    out.reserve(m);
    for (int p = 0; p < m; ++p) {
        Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(family[0].amplitudes.size());
        for (int k = 0; k < m; ++k) amps += B(k, p) * family[k].amplitudes;
        out.emplace_back(family.sites(), std::move(amps), "cob");
    }
    return BasisFamily(std::move(out));
}

namespace {

class DetChain {
public:
    DetChain(const BasisFamily& family, std::uint64_t seed, int start_retries)
        : family_(family), rng_(seed), m_(family.size()), n_(family.sites()) {
        find_start(start_retries);
    }

    void find_start(int retries) {
        for (int t = 0; t < retries; ++t) {
            MultiConfig s;
            s.copies.reserve(m_);
            for (int i = 0; i < m_; ++i)
                s.copies.push_back(
                    {static_cast<std::uint32_t>(rng_.below(std::uint64_t(1) << n_)), n_});
            const Eigen::MatrixXcd phi = overlap_matrix(family_, s);
            const double lad = log_abs_det(phi);
            if (std::isfinite(lad)) {
                cur_ = std::move(s);
                log_abs_ = lad;
                return;
            }
        }
        throw NumericalError(
            "sampler: no nonzero-amplitude start found; determinant state may vanish");
    }

    bool step() {
        const int copy = static_cast<int>(rng_.below(m_));
        const int site = static_cast<int>(rng_.below(n_));
        MultiConfig prop = cur_;
        prop.copies[copy] = prop.copies[copy].flipped(site);
        const double lad = log_abs_det(overlap_matrix(family_, prop));
        bool accept = false;
        if (std::isfinite(lad)) {
            const double log_ratio = 2.0 * (lad - log_abs_);
            accept = log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio;
        }
        if (accept) {
            cur_ = std::move(prop);
            log_abs_ = lad;
        }
        return accept;
    }

    const MultiConfig& current() const { return cur_; }
    bool current_is_zero() const { return !std::isfinite(log_abs_); }

private:
    const BasisFamily& family_;
    Rng rng_;
    int m_, n_;
    MultiConfig cur_;
    double log_abs_ = 0.0;
};

ChainRun run_one_chain(const BasisFamily& family, const DetSamplerConfig& cfg,
                       std::uint64_t chain_seed) {
    ChainRun run;
    run.stats.seed = chain_seed;
    const int n = family.sites(), m = family.size();

    std::uint64_t seed = chain_seed;
    auto chain = std::make_unique<DetChain>(family, seed, cfg.start_retries);
    const long burn = cfg.effective_burn_in(n, m);
    for (long b = 0; b < burn; ++b) {
        run.stats.accepted += chain->step() ? 1 : 0;
        ++run.stats.proposals;
    }
    run.samples.reserve(cfg.n_samples_per_chain);
    while (static_cast<int>(run.samples.size()) < cfg.n_samples_per_chain) {
        for (int t = 0; t < cfg.thin; ++t) {
            run.stats.accepted += chain->step() ? 1 : 0;
            ++run.stats.proposals;
        }
        if (chain->current_is_zero()) {
            // Should be unreachable from a valid start; reseed and restart.
            ++run.stats.restarts;
            seed = derive_seed(seed, 0x5eedu);
            chain = std::make_unique<DetChain>(family, seed, cfg.start_retries);
            continue;
        }
        run.samples.push_back(chain->current());
    }
    return run;
}

} // namespace

SampleRun sample_chain(const BasisFamily& family, const DetSamplerConfig& cfg) {
    cfg.validate();
    SampleRun out;
    out.chains.resize(cfg.n_chains);
    if (cfg.workers <= 1 || cfg.n_chains == 1) {
        for (int c = 0; c < cfg.n_chains; ++c)
            out.chains[c] = run_one_chain(family, cfg, derive_seed(cfg.seed, c));
        return out;
    }
    // Chains are independent; results land at their chain index, so the
    // reduction order is fixed no matter how the workers are scheduled.
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (int c = next.fetch_add(1); c < cfg.n_chains; c = next.fetch_add(1)) {
            try {
                out.chains[c] = run_one_chain(family, cfg, derive_seed(cfg.seed, c));
            } catch (...) {
                std::scoped_lock lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(cfg.workers, cfg.n_chains); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

Eigen::MatrixXcd local_rayleigh(const BasisFamily& family, const OperatorTerms& H,
                                const MultiConfig& s) {
    const int m = family.size();
    const Eigen::MatrixXcd phi = overlap_matrix(family, s);
    Eigen::MatrixXcd phi_h = Eigen::MatrixXcd::Zero(m, m);
    // Row i shares the connected set of s_i across all members.
    for (int i = 0; i < m; ++i) {
        H.for_connected(s.copies[i], [&](const SpinConfig& sp, cplx v) {
            const auto idx = static_cast<Eigen::Index>(sp.index());
            for (int j = 0; j < m; ++j) phi_h(i, j) += v * family[j].amplitudes[idx];
        });
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(phi);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(lu.matrixLU()(i, i)) < 1e-300)
            throw NumericalError("local_rayleigh: singular overlap matrix Phi(s)");
    }
    return lu.solve(phi_h);
}

} // namespace detspace
