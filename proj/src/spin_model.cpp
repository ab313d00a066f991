#include "detspace/spin_model.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace detspace {

int Geometry::sites() const {
    if (extent < 1) throw ValidationError("geometry extent must be >= 1");
    return kind == LatticeKind::chain ? extent : extent * extent;
}

std::vector<std::pair<int, int>> Geometry::bonds() const {
    if (extent < 1) throw ValidationError("geometry extent must be >= 1");
    // Collect candidate links, normalize to unordered pairs, keep each pair
    // once. A periodic extent of 2 makes the wrap link coincide with the
    // direct one; it is counted a single time.
    std::set<std::pair<int, int>> pairs;
    auto add = [&pairs](int a, int b) {
        if (a == b) return;
        pairs.emplace(std::min(a, b), std::max(a, b));
    };
    const int L = extent;
    if (kind == LatticeKind::chain) {
        for (int i = 0; i + 1 < L; ++i) add(i, i + 1);
        if (boundary == Boundary::periodic && L > 1) add(L - 1, 0);
    } else {
        auto id = [L](int r, int c) { return r * L + c; };
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < L; ++c) {
                if (c + 1 < L) add(id(r, c), id(r, c + 1));
                else if (boundary == Boundary::periodic) add(id(r, c), id(r, 0));
                if (r + 1 < L) add(id(r, c), id(r + 1, c));
                else if (boundary == Boundary::periodic) add(id(r, c), id(0, c));
            }
    }
    return {pairs.begin(), pairs.end()};
}

Geometry parse_geometry(const std::string& text) {
    std::stringstream ss(text);
    std::string kind, extent, boundary;
    if (!std::getline(ss, kind, ':') || !std::getline(ss, extent, ':') ||
        !std::getline(ss, boundary)) {
        throw ValidationError("geometry must be kind:extent:boundary, e.g. chain:12:open");
    }
    Geometry g;
    if (kind == "chain") g.kind = LatticeKind::chain;
    else if (kind == "square") g.kind = LatticeKind::square;
    else throw ValidationError("unknown lattice kind: " + kind);
    try {
        g.extent = std::stoi(extent);
    } catch (const std::exception&) {
        throw ValidationError("bad geometry extent: " + extent);
    }
    if (g.extent < 1) throw ValidationError("geometry extent must be >= 1");
    if (boundary == "open") g.boundary = Boundary::open;
    else if (boundary == "periodic") g.boundary = Boundary::periodic;
    else throw ValidationError("unknown boundary: " + boundary);
    return g;
}

OperatorTerms::OperatorTerms(int n, std::vector<Term> terms)
    : n_(n), terms_(std::move(terms)) {
    if (n_ < 1) throw ValidationError("operator needs at least one site");
    std::map<int, double> xmap;
    for (const auto& t : terms_) {
        switch (t.body) {
            case TermBody::zz:
                if (t.site_a < 0 || t.site_a >= n_ || t.site_b < 0 || t.site_b >= n_)
                    throw ValidationError("zz term site out of range");
                has_diagonal_ = true;
                break;
            case TermBody::z:
                if (t.site_a < 0 || t.site_a >= n_)
                    throw ValidationError("z term site out of range");
                has_diagonal_ = true;
                break;
            case TermBody::identity:
                has_diagonal_ = true;
                break;
            case TermBody::x:
                if (t.site_a < 0 || t.site_a >= n_)
                    throw ValidationError("x term site out of range");
                xmap[t.site_a] += t.coeff;
                break;
        }
    }
    x_by_site_.assign(xmap.begin(), xmap.end());
}

double OperatorTerms::diagonal_element(const SpinConfig& s) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        switch (t.body) {
            case TermBody::zz: acc += t.coeff * s.z(t.site_a) * s.z(t.site_b); break;
            case TermBody::z: acc += t.coeff * s.z(t.site_a); break;
            case TermBody::identity: acc += t.coeff; break;
            case TermBody::x: break;
        }
    }
    return acc;
}

std::vector<std::pair<SpinConfig, cplx>> OperatorTerms::connected_elements(
    const SpinConfig& s) const {
    std::vector<std::pair<SpinConfig, cplx>> out;
    out.reserve(max_connected());
    for_connected(s, [&out](const SpinConfig& sp, cplx v) { out.emplace_back(sp, v); });
    return out;
}

OperatorTerms OperatorTerms::diagonal_part() const {
    std::vector<Term> kept;
    for (const auto& t : terms_)
        if (t.body != TermBody::x) kept.push_back(t);
    return {n_, std::move(kept)};
}

OperatorTerms OperatorTerms::offdiagonal_part() const {
    std::vector<Term> kept;
    for (const auto& t : terms_)
        if (t.body == TermBody::x) kept.push_back(t);
    return {n_, std::move(kept)};
}

OperatorTerms build_tfim(const Geometry& geometry, double J, double h) {
    const int n = geometry.sites();
    std::vector<Term> terms;
    for (auto [i, j] : geometry.bonds()) terms.push_back({-J, TermBody::zz, i, j});
    for (int i = 0; i < n; ++i) terms.push_back({-h, TermBody::x, i, -1});
    return {n, std::move(terms)};
}

OperatorTerms magnetization_x(int n) {
    std::vector<Term> terms;
    for (int i = 0; i < n; ++i) terms.push_back({1.0 / n, TermBody::x, i, -1});
    return {n, std::move(terms)};
}

OperatorTerms identity_op(int n) {
    return {n, {Term{1.0, TermBody::identity, -1, -1}}};
}

OperatorTerms combine_terms(const std::vector<double>& gammas,
                            const std::vector<OperatorTerms>& parts) {
    if (gammas.size() != parts.size() || parts.empty())
        throw ValidationError("combine_terms: gammas and parts lengths must match and be nonempty");
    const int n = parts.front().sites();
    std::vector<Term> merged;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        if (parts[p].sites() != n)
            throw ValidationError("combine_terms: parts must share the site count");
        for (Term t : parts[p].terms()) {
            t.coeff *= gammas[p];
            merged.push_back(t);
        }
    }
    return {n, std::move(merged)};
}

// ---------------------------------------------------------------------------
// Operator spec file (JSON)
// ---------------------------------------------------------------------------

namespace {

const char* body_name(TermBody b) {
    switch (b) {
        case TermBody::zz: return "ZZ";
        case TermBody::x: return "X";
        case TermBody::z: return "Z";
        case TermBody::identity: return "I";
    }
    return "?";
}

TermBody body_from_name(const std::string& s) {
    if (s == "ZZ") return TermBody::zz;
    if (s == "X") return TermBody::x;
    if (s == "Z") return TermBody::z;
    if (s == "I") return TermBody::identity;
    throw ValidationError("unknown term body: " + s);
}

} // namespace

std::string operator_to_json(const OperatorTerms& op) {
    nlohmann::json j;
    j["n"] = op.sites();
    j["terms"] = nlohmann::json::array();
    for (const auto& t : op.terms()) {
        nlohmann::json e;
        e["coeff"] = t.coeff;
        e["body"] = body_name(t.body);
        std::vector<int> sites;
        if (t.body == TermBody::zz) sites = {t.site_a, t.site_b};
        else if (t.body != TermBody::identity) sites = {t.site_a};
        e["sites"] = sites;
        j["terms"].push_back(e);
    }
    return j.dump(2);
}

OperatorTerms operator_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("operator spec: bad JSON: ") + e.what());
    }
    if (!j.contains("n") || !j.contains("terms"))
        throw ValidationError("operator spec: missing n or terms");
    const int n = j["n"].get<int>();
    std::vector<Term> terms;
    for (const auto& e : j["terms"]) {
        Term t;
        t.coeff = e.at("coeff").get<double>();
        t.body = body_from_name(e.at("body").get<std::string>());
        auto sites = e.value("sites", std::vector<int>{});
        const std::size_t want = t.body == TermBody::zz ? 2 : (t.body == TermBody::identity ? 0 : 1);
        if (sites.size() != want)
            throw ValidationError("operator spec: wrong site count for body");
        if (want >= 1) t.site_a = sites[0];
        if (want >= 2) t.site_b = sites[1];
        terms.push_back(t);
    }
    return {n, std::move(terms)};
}

OperatorTerms read_operator_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open operator spec: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return operator_from_json(buf.str());
}

void write_operator_json(const OperatorTerms& op, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write operator spec: " + path);
    f << operator_to_json(op) << "\n";
}

} // namespace detspace
