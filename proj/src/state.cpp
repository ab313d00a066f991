#include "detspace/state.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace detspace {

AmplitudeState::AmplitudeState(int n_sites, Eigen::VectorXcd amps, std::string lbl)
    : n(n_sites), amplitudes(std::move(amps)), label(std::move(lbl)) {
    if (n < 1) throw ValidationError("state needs at least one site");
    if (n > kMaxSites)
        throw ValidationError("dense state beyond the 2^20 amplitude cap");
    if (amplitudes.size() != (Eigen::Index(1) << n))
        throw ValidationError("amplitude vector length must be 2^n");
    if (amplitudes.isZero(0.0)) throw ValidationError("state must not be the zero vector");
}

cplx amplitude(const AmplitudeState& state, const SpinConfig& s) {
    if (s.n != state.n) throw ValidationError("amplitude: site-count mismatch");
    return state.amplitudes[static_cast<Eigen::Index>(s.index())];
}

AmplitudeState uniform_state(int n) {
    if (n < 1) throw ValidationError("uniform_state: n must be >= 1");
    if (n > kMaxSites) throw ValidationError("dense state beyond the 2^20 amplitude cap");
    const Eigen::Index dim = Eigen::Index(1) << n;
    Eigen::VectorXcd amps =
        Eigen::VectorXcd::Constant(dim, cplx(std::pow(2.0, -0.5 * n), 0.0));
    return {n, std::move(amps), "uniform"};
}

AmplitudeState basis_state(const SpinConfig& s) {
    const Eigen::Index dim = Eigen::Index(1) << s.n;
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(dim);
    amps[static_cast<Eigen::Index>(s.index())] = 1.0;
    return {s.n, std::move(amps), "basis"};
}

AmplitudeState random_state(int n, Rng& rng, const std::string& label) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    Eigen::VectorXcd amps(dim);
    for (Eigen::Index i = 0; i < dim; ++i) amps[i] = rng.gaussian_cplx();
    amps /= amps.norm();
    return {n, std::move(amps), label};
}

cplx local_row(const AmplitudeState& state, const OperatorTerms& O, const SpinConfig& s) {
    if (state.n != O.sites()) throw ValidationError("local_row: operator/state shape mismatch");
    cplx acc = 0.0;
    O.for_connected(s, [&](const SpinConfig& sp, cplx v) {
        acc += v * state.amplitudes[static_cast<Eigen::Index>(sp.index())];
    });
    return acc;
}

AmplitudeState apply_operator(const OperatorTerms& O, const AmplitudeState& state) {
    if (state.n != O.sites())
        throw ValidationError("apply_operator: operator/state shape mismatch");
    const Eigen::Index dim = state.amplitudes.size();
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        SpinConfig s{static_cast<std::uint32_t>(i), state.n};
        O.for_connected(s, [&](const SpinConfig& sp, cplx v) {
            out[i] += v * state.amplitudes[static_cast<Eigen::Index>(sp.index())];
        });
    }
    AmplitudeState r;
    r.n = state.n;
    r.amplitudes = std::move(out);
    r.label = state.label.empty() ? "applied" : "O*" + state.label;
    return r;
}

cplx inner(const AmplitudeState& a, const AmplitudeState& b) {
    if (a.n != b.n) throw ValidationError("inner: site-count mismatch");
    return a.amplitudes.dot(b.amplitudes);
}

double norm(const AmplitudeState& s) { return s.amplitudes.norm(); }

AmplitudeState normalized(const AmplitudeState& s) {
    AmplitudeState r = s;
    r.amplitudes /= s.amplitudes.norm();
    return r;
}

BasisFamily::BasisFamily(std::vector<AmplitudeState> m) : members(std::move(m)) {
    if (members.empty()) throw ValidationError("family needs at least one member");
    const int n = members.front().n;
    for (const auto& st : members)
        if (st.n != n) throw ValidationError("family members must share the site count");
}

int BasisFamily::gram_rank(double rel_tol) const {
    const int m = size();
    Eigen::MatrixXcd g(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = inner(members[i], members[j]);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(g);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv[k] > rel_tol * sv[0]) ++rank;
    return rank;
}

// ---------------------------------------------------------------------------
// qsv1 I/O
// ---------------------------------------------------------------------------

void write_state(const AmplitudeState& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    nlohmann::json header;
    header["format"] = "qsv1";
    header["n"] = state.n;
    header["encoding"] = "c128le";
    header["order"] = "site0-lsb-up0";
    f << header.dump() << "\n";
    static_assert(sizeof(cplx) == 16);
    f.write(reinterpret_cast<const char*>(state.amplitudes.data()),
            static_cast<std::streamsize>(state.dim() * sizeof(cplx)));
    if (!f) throw ValidationError("short write: " + path);
}

AmplitudeState read_state(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(f, line)) throw ValidationError(path + ": missing qsv1 header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": malformed qsv1 header: " + e.what());
    }
    if (header.value("format", "") != "qsv1")
        throw ValidationError(path + ": not a qsv1 file");
    if (header.value("encoding", "") != "c128le" ||
        header.value("order", "") != "site0-lsb-up0")
        throw ValidationError(path + ": unsupported qsv1 encoding/order");
    const int n = header.value("n", 0);
    if (n < 1 || n > kMaxSites) throw ValidationError(path + ": header n out of range");

    const std::size_t dim = std::size_t(1) << n;
    Eigen::VectorXcd amps(static_cast<Eigen::Index>(dim));
    f.read(reinterpret_cast<char*>(amps.data()),
           static_cast<std::streamsize>(dim * sizeof(cplx)));
    if (static_cast<std::size_t>(f.gcount()) != dim * sizeof(cplx))
        throw ValidationError(path + ": payload length mismatch");
    char extra;
    if (f.read(&extra, 1)) throw ValidationError(path + ": payload length mismatch");
    return {n, std::move(amps), path};
}

BasisFamily read_family(const std::vector<std::string>& paths) {
    std::vector<AmplitudeState> members;
    members.reserve(paths.size());
    for (const auto& p : paths) members.push_back(read_state(p));
    return BasisFamily(std::move(members));
}

} // namespace detspace
