// detspace: basis generation, Rayleigh-matrix estimation, trajectory
// post-processing and subspace analysis for spin models at desk scale.
//
// Every run writes a resolved-config snapshot next to its outputs; payload
// files carry no timestamps so identical configs give identical bytes.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "detspace/bridge.hpp"
#include "detspace/det_state.hpp"
#include "detspace/dynamics.hpp"
#include "detspace/oracle.hpp"
#include "detspace/rayleigh.hpp"
#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"
#include "detspace/subspace.hpp"

namespace fs = std::filesystem;
using namespace detspace;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct ModelFlags {
    std::string op_file;
    std::string model = "tfim";
    std::string geometry;
    double coupling_j = 1.0;
    double field_h = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--op", op_file, "operator spec JSON file");
        cmd->add_option("--model", model, "built-in model name (tfim)");
        cmd->add_option("--geometry", geometry, "kind:extent:boundary, e.g. chain:12:open");
        cmd->add_option("--J", coupling_j, "coupling strength");
        cmd->add_option("--h", field_h, "transverse field");
    }

    OperatorTerms build() const {
        if (!op_file.empty()) return read_operator_json(op_file);
        if (geometry.empty())
            throw ValidationError("need either --op FILE or --model/--geometry flags");
        if (model != "tfim") throw ValidationError("unknown model: " + model);
        return build_tfim(parse_geometry(geometry), coupling_j, field_h);
    }

    json describe() const {
        json j;
        if (!op_file.empty()) {
            j["op"] = op_file;
        } else {
            j["model"] = model;
            j["geometry"] = geometry;
            j["J"] = coupling_j;
            j["h"] = field_h;
        }
        return j;
    }
};

fs::path default_out_dir() {
    if (const char* env = std::getenv("DETSPACE_OUT")) return env;
    return ".";
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path.string());
    f << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void write_config_snapshot(const fs::path& dir, const std::string& command, const json& cfg) {
    json j;
    j["command"] = command;
    j["config"] = cfg;
    write_text(dir / (command + "-config.json"), j.dump(2) + "\n");
}

void append_log(const fs::path& dir, const std::string& line) {
    fs::create_directories(dir);
    std::ofstream f(dir / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    f << std::put_time(std::gmtime(&now), "%FT%TZ") << " " << line << "\n";
}

std::string fmt_double(double x) {
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct LoadedBasis {
    BasisFamily family;
    std::vector<double> times;
    OperatorTerms op;
    double delta = 0.0;
};

LoadedBasis load_manifest(const fs::path& manifest_path) {
    json j;
    try {
        j = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw ValidationError("manifest: bad JSON: " + std::string(e.what()));
    }
    if (j.value("format", "") != "detspace-manifest-v1")
        throw ValidationError("manifest: unknown format marker");
    const fs::path dir = manifest_path.parent_path();
    std::vector<std::string> files;
    for (const auto& f : j.at("files")) files.push_back((dir / f.get<std::string>()).string());
    LoadedBasis out{read_family(files), j.at("times").get<std::vector<double>>(),
                    operator_from_json(j.at("operator").dump()), j.value("delta", 0.0)};
    return out;
}

DetSamplerConfig sampler_flags_to_config(int samples, int chains, long burn_in, int thin,
                                         std::uint64_t seed, int workers) {
    DetSamplerConfig cfg;
    cfg.n_chains = chains;
    cfg.n_samples_per_chain = std::max(1, samples / std::max(1, chains));
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.seed = seed;
    cfg.workers = workers;
    return cfg;
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

int cmd_model(const ModelFlags& model, bool dump, const std::string& save_op,
              const fs::path& out_dir) {
    const OperatorTerms op = model.build();
    write_config_snapshot(out_dir, "model", model.describe());
    if (!save_op.empty()) write_operator_json(op, (out_dir / save_op).string());
    if (dump) {
        const Eigen::MatrixXd dense = dense_matrix(op);
        std::ostringstream csv;
        for (Eigen::Index i = 0; i < dense.rows(); ++i) {
            for (Eigen::Index j = 0; j < dense.cols(); ++j)
                csv << (j ? "," : "") << fmt_double(dense(i, j));
            csv << "\n";
        }
        write_text(out_dir / "model-dense.csv", csv.str());
        std::cout << csv.str();
    }
    append_log(out_dir, "model: n=" + std::to_string(op.sites()) +
                            " terms=" + std::to_string(op.terms().size()));
    return 0;
}

// ---------------------------------------------------------------------------
// generate-basis
// ---------------------------------------------------------------------------

int cmd_generate_basis(const ModelFlags& model, double delta, int steps,
                       const std::string& scheme_name, const std::string& noise_text,
                       std::uint64_t seed, const std::string& psi0_file,
                       const fs::path& out_dir) {
    const OperatorTerms op = model.build();
    const SchemeSpec scheme = parse_scheme(scheme_name);
    NoiseSpec noise = NoiseSpec::parse(noise_text);
    noise.seed = seed;
    const AmplitudeState psi0 =
        psi0_file.empty() ? uniform_state(op.sites()) : read_state(psi0_file);

    GeneratedBasis gb = generate_basis(op, psi0, delta, steps, scheme, noise);

    fs::create_directories(out_dir);
    json manifest;
    manifest["format"] = "detspace-manifest-v1";
    manifest["n"] = op.sites();
    manifest["delta"] = delta;
    manifest["steps"] = steps;
    manifest["scheme"] = gb.report.scheme;
    manifest["noise"] = gb.report.noise;
    manifest["seed"] = seed;
    manifest["times"] = gb.report.times;
    manifest["operator"] = json::parse(operator_to_json(op));
    manifest["psi0"] = psi0_file.empty() ? "uniform" : psi0_file;
    manifest["report"] = {{"infidelity_vs_exact", gb.report.infidelity_vs_exact}};

    std::vector<std::string> files;
    for (int k = 0; k < gb.family.size(); ++k) {
        std::ostringstream name;
        name << "basis_" << std::setw(3) << std::setfill('0') << k << ".qsv";
        write_state(gb.family[k], (out_dir / name.str()).string());
        files.push_back(name.str());
    }
    manifest["files"] = files;
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

    json cfg = model.describe();
    cfg["delta"] = delta;
    cfg["steps"] = steps;
    cfg["scheme"] = scheme_name;
    cfg["noise"] = noise_text;
    cfg["seed"] = seed;
    write_config_snapshot(out_dir, "generate-basis", cfg);
    append_log(out_dir, "generate-basis: " + std::to_string(files.size()) + " states, final infidelity " +
                            fmt_double(gb.report.infidelity_vs_exact.back()));
    std::cout << "wrote " << files.size() << " basis states to " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rayleigh
// ---------------------------------------------------------------------------

int cmd_rayleigh(const std::string& family_list, const std::string& manifest_file,
                 const ModelFlags& model, const std::string& estimator,
                 const std::string& policy_text, const std::string& imag_text, int samples,
                 int chains, long burn_in, int thin, std::uint64_t seed, int workers,
                 int xp_digits, const std::string& out_file, const std::string& pack_out,
                 const fs::path& out_dir) {
    BasisFamily family;
    OperatorTerms op = [&] {
        if (!manifest_file.empty()) {
            LoadedBasis lb = load_manifest(manifest_file);
            family = std::move(lb.family);
            return lb.op;
        }
        if (family_list.empty())
            throw ValidationError("need --family f1.qsv,... or --manifest dir/manifest.json");
        family = read_family(split_list(family_list));
        return model.build();
    }();
    if (op.sites() != family.sites())
        throw ValidationError("operator and family site counts differ");

    const ImagPolicy imag =
        imag_text == "keep" ? ImagPolicy::keep
        : imag_text == "discard"
            ? ImagPolicy::discard_eig_imag
            : throw ValidationError("--imag must be keep or discard");
    const DetSamplerConfig cfg =
        sampler_flags_to_config(samples, chains, burn_in, thin, seed, workers);

    RayleighEstimate est;
    std::optional<GramPack> pack;
    if (estimator == "det") {
        est = estimate_det_state(family, op, cfg, imag);
    } else if (estimator == "sos") {
        pack = estimate_sum_of_states(family, {{"H", op}}, cfg);
        est = assemble_rayleigh(*pack, AssemblyPolicy::parse(policy_text), "H", imag);
    } else if (estimator == "exact") {
        pack = exact_gram_pack(family, {{"H", op}}, xp_digits);
        est = assemble_rayleigh(*pack, AssemblyPolicy::parse(policy_text), "H", imag);
    } else {
        throw ValidationError("--estimator must be det, sos or exact");
    }

    write_text(out_dir / out_file, rayleigh_to_json(est) + "\n");
    if (!pack_out.empty() && pack) write_text(out_dir / pack_out, pack_to_json(*pack) + "\n");

    json cfgj = model.describe();
    cfgj["estimator"] = estimator;
    cfgj["policy"] = policy_text;
    cfgj["imag"] = imag_text;
    cfgj["samples"] = samples;
    cfgj["chains"] = chains;
    cfgj["seed"] = seed;
    cfgj["xp_digits"] = xp_digits;
    write_config_snapshot(out_dir, "rayleigh", cfgj);
    append_log(out_dir, "rayleigh: estimator=" + estimator + " -> " + out_file);
    std::cout << "rayleigh estimate written to " << (out_dir / out_file).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bridge
// ---------------------------------------------------------------------------

std::vector<double> refined_grid(const std::vector<double>& base_times, int refine,
                                 double extrapolate) {
    if (base_times.size() < 2) throw ValidationError("bridge: need at least two basis times");
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < base_times.size(); ++k) {
        const double t0 = base_times[k], t1 = base_times[k + 1];
        for (int r = 0; r < refine; ++r)
            out.push_back(t0 + (t1 - t0) * r / refine);
    }
    out.push_back(base_times.back());
    if (extrapolate > 0.0) {
        const double horizon = base_times.back() - base_times.front();
        const double dt = (base_times.back() - base_times.front()) /
                          ((base_times.size() - 1) * refine);
        const double t_end = base_times.back() + extrapolate * horizon;
        for (double t = base_times.back() + dt; t <= t_end + 1e-12; t += dt)
            out.push_back(t);
    }
    return out;
}

int cmd_bridge(const std::string& manifest_file, const std::string& rayleigh_file,
               int grid_refine, double extrapolate, int digits,
               const std::string& out_file, const std::string& traj_json_file,
               const fs::path& out_dir) {
    LoadedBasis lb = load_manifest(manifest_file);
    RayleighEstimate est = rayleigh_from_json(read_text(rayleigh_file));
    if (est.m() != lb.family.size())
        throw ValidationError("rayleigh estimate size does not match the family");

    const std::vector<double> grid = refined_grid(lb.times, grid_refine, extrapolate);
    Eigen::VectorXcd alpha0 = Eigen::VectorXcd::Zero(est.m());
    alpha0[0] = 1.0;
    BridgeTrajectory traj = bridge_solve(est, alpha0, grid, digits);

    // Observables from an exact pack of the loaded family (desk scale).
    const OperatorTerms mx = magnetization_x(lb.op.sites());
    const GramPack pack = exact_gram_pack(lb.family, {{"Mx", mx}}, digits);
    const ObservableSeries mx_series = bridge_observable(pack, "Mx", traj);

    std::vector<double> infidelity;
    if (lb.op.sites() <= kMaxKrylovSites) {
        const ExactEvolver ev(lb.op);
        const auto oracle = ev.series(lb.family[0], grid);
        infidelity = bridge_infidelity(traj, lb.family, oracle);
    }

    std::ostringstream csv;
    csv << "t,alpha_norm,obs_mx" << (infidelity.empty() ? "" : ",infidelity") << "\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto& a = traj.alphas[k];
        const double g_norm =
            std::sqrt(std::abs((a.adjoint() * pack.G * a).value().real()));
        csv << fmt_double(grid[k]) << "," << fmt_double(g_norm) << ","
            << fmt_double(mx_series.values[k]);
        if (!infidelity.empty()) csv << "," << fmt_double(infidelity[k]);
        csv << "\n";
    }
    write_text(out_dir / out_file, csv.str());
    if (!traj_json_file.empty())
        write_text(out_dir / traj_json_file, trajectory_to_json(traj) + "\n");

    json cfgj;
    cfgj["manifest"] = manifest_file;
    cfgj["rayleigh"] = rayleigh_file;
    cfgj["grid_refine"] = grid_refine;
    cfgj["extrapolate"] = extrapolate;
    cfgj["digits"] = digits;
    write_config_snapshot(out_dir, "bridge", cfgj);
    append_log(out_dir, "bridge: " + std::to_string(grid.size()) + " grid points -> " + out_file);
    std::cout << "trajectory written to " << (out_dir / out_file).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gs-interpolate
// ---------------------------------------------------------------------------

int cmd_gs_interpolate(const std::string& family_list, const std::string& parts_list,
                       const std::string& grid_text, const std::string& out_file,
                       const fs::path& out_dir) {
    const BasisFamily family = read_family(split_list(family_list));
    const auto part_files = split_list(parts_list);
    if (part_files.empty()) throw ValidationError("--parts needs at least one operator file");

    std::map<std::string, OperatorTerms> ops;
    std::vector<std::string> labels;
    std::vector<OperatorTerms> parts;
    for (std::size_t p = 0; p < part_files.size(); ++p) {
        const std::string label = "H" + std::to_string(p);
        OperatorTerms op = read_operator_json(part_files[p]);
        ops.emplace(label, op);
        labels.push_back(label);
        parts.push_back(std::move(op));
    }

    double lo = 0.0, hi = 0.0;
    int count = 0;
    {
        std::stringstream ss(grid_text);
        char c1, c2;
        if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1)
            throw ValidationError("--grid must be start:end:count");
    }

    const GramPack pack = exact_gram_pack(family, ops);
    const GroundInterpolator interp(pack, labels);

    std::ostringstream csv;
    csv << "gamma,mu0,infidelity_vs_exact\n";
    for (int q = 0; q < count; ++q) {
        const double g = count == 1 ? lo : lo + (hi - lo) * q / (count - 1);
        std::vector<double> gamma(labels.size(), 1.0);
        gamma.back() = g;
        const InterpolationResult r = interp.at(gamma);

        // Desk-scale oracle: exact ground state of the combined operator.
        std::vector<double> gvec = gamma;
        const OperatorTerms hq = combine_terms(gvec, parts);
        const AmplitudeState gs = ground_state(hq);
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(family[0].amplitudes.size());
        for (int j = 0; j < family.size(); ++j) psi += r.alpha[j] * family[j].amplitudes;
        const double inf = 1.0 - fidelity({family.sites(), psi, "interp"}, gs);

        csv << fmt_double(g) << "," << fmt_double(r.mu0) << "," << fmt_double(inf) << "\n";
    }
    write_text(out_dir / out_file, csv.str());

    json cfgj;
    cfgj["family"] = family_list;
    cfgj["parts"] = parts_list;
    cfgj["grid"] = grid_text;
    write_config_snapshot(out_dir, "gs-interpolate", cfgj);
    append_log(out_dir, "gs-interpolate -> " + out_file);
    std::cout << "interpolation curve written to " << (out_dir / out_file).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// distance
// ---------------------------------------------------------------------------

int cmd_distance(const std::string& family_a, const std::string& family_b,
                 const std::string& estimator, int samples, int chains, std::uint64_t seed,
                 const fs::path& out_dir) {
    const BasisFamily a = read_family(split_list(family_a));
    const BasisFamily b = read_family(split_list(family_b));

    json result;
    if (estimator == "exact") {
        result["distance"] = subspace_distance_exact(a, b);
    } else if (estimator == "mc") {
        const DetSamplerConfig cfg = sampler_flags_to_config(samples, chains, -1, 1, seed, 1);
        const DistanceEstimate d = subspace_distance_mc(a, b, cfg);
        result["distance"] = d.distance;
        result["std_err"] = d.std_err;
        result["fidelity"] = d.fidelity;
    } else {
        throw ValidationError("--estimator must be exact or mc");
    }
    const std::string text = result.dump(2) + "\n";
    write_text(out_dir / "distance.json", text);
    std::cout << text;
    write_config_snapshot(out_dir, "distance",
                          json{{"family_a", family_a},
                               {"family_b", family_b},
                               {"estimator", estimator},
                               {"samples", samples},
                               {"seed", seed}});
    return 0;
}

// ---------------------------------------------------------------------------
// excited
// ---------------------------------------------------------------------------

int cmd_excited(const std::string& family_list, const std::string& manifest_file,
                const ModelFlags& model, const std::string& estimator,
                const std::string& policy_text, int samples, int chains, std::uint64_t seed,
                bool with_mx, const std::string& out_file, const fs::path& out_dir) {
    BasisFamily family;
    OperatorTerms op = [&] {
        if (!manifest_file.empty()) {
            LoadedBasis lb = load_manifest(manifest_file);
            family = std::move(lb.family);
            return lb.op;
        }
        if (family_list.empty())
            throw ValidationError("need --family or --manifest");
        family = read_family(split_list(family_list));
        return model.build();
    }();

    std::map<std::string, OperatorTerms> ops{{"H", op}};
    if (with_mx) ops.emplace("Mx", magnetization_x(op.sites()));

    RitzResult ritz;
    std::optional<Eigen::VectorXd> mx_values;
    if (estimator == "exact") {
        const GramPack pack = exact_gram_pack(family, ops, 200);
        try {
            ritz = ritz_spectrum(pack);
            if (with_mx) mx_values = ritz_observable(pack, "H", "Mx");
        } catch (const NumericalError&) {
            // Nearly dependent family: the whitened generalized path refuses;
            // fall back to the eigendecomposition of the assembled matrix.
            append_log(out_dir, "excited: singular Gram under the whitened path; "
                                "using the assembled-matrix route");
            ritz = ritz_spectrum(assemble_rayleigh(pack, AssemblyPolicy::parse(policy_text)));
            mx_values.reset();
        }
    } else if (estimator == "det") {
        const DetSamplerConfig cfg = sampler_flags_to_config(samples, chains, -1, 1, seed, 1);
        ritz = ritz_spectrum(estimate_det_state(family, op, cfg));
    } else if (estimator == "sos") {
        const DetSamplerConfig cfg = sampler_flags_to_config(samples, chains, -1, 1, seed, 1);
        const GramPack pack = estimate_sum_of_states(family, ops, cfg);
        ritz = ritz_spectrum(assemble_rayleigh(pack, AssemblyPolicy::parse(policy_text)));
    } else {
        throw ValidationError("--estimator must be exact, det or sos");
    }

    json j;
    j["values"] = std::vector<double>(ritz.values.data(), ritz.values.data() + ritz.values.size());
    json vecs = json::array();
    for (int k = 0; k < ritz.vectors.cols(); ++k) {
        json col = json::array();
        for (int i = 0; i < ritz.vectors.rows(); ++i)
            col.push_back({ritz.vectors(i, k).real(), ritz.vectors(i, k).imag()});
        vecs.push_back(col);
    }
    j["vectors"] = vecs;
    if (mx_values)
        j["observable_mx"] =
            std::vector<double>(mx_values->data(), mx_values->data() + mx_values->size());
    write_text(out_dir / out_file, j.dump(2) + "\n");

    write_config_snapshot(out_dir, "excited",
                          json{{"estimator", estimator}, {"samples", samples}, {"seed", seed}});
    std::cout << "ritz report written to " << (out_dir / out_file).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench-estimators
// ---------------------------------------------------------------------------

int cmd_bench(const ModelFlags& model, double delta, int steps, int samples,
              std::uint64_t seed, int digits, const fs::path& out_dir) {
    const OperatorTerms op = model.build();
    const GeneratedBasis gb =
        generate_basis(op, uniform_state(op.sites()), delta, steps, parse_scheme("trotter2"));
    const int m = gb.family.size();
    const ExactEvolver ev(op);
    const auto oracle = ev.series(gb.family[0], gb.report.times);
    const GramPack exact_pack = exact_gram_pack(gb.family, {{"H", op}}, digits);

    Eigen::VectorXcd alpha0 = Eigen::VectorXcd::Zero(m);
    alpha0[0] = 1.0;

    struct Row {
        std::string label;
        int samples;
        double wall_s;
        double final_infidelity;
    };
    std::vector<Row> rows;

    auto run_bridge = [&](const RayleighEstimate& est) {
        const BridgeTrajectory traj = bridge_solve(est, alpha0, gb.report.times, digits);
        return bridge_infidelity(traj, gb.family, oracle).back();
    };
    auto timed = [&](const std::string& label, int nsamp, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        const RayleighEstimate est = fn();
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back({label, nsamp, wall, run_bridge(est)});
    };

    DetSamplerConfig cfg = sampler_flags_to_config(samples, 4, -1, 1, seed, 1);
    timed("det-state", samples, [&] { return estimate_det_state(gb.family, op, cfg); });
    const GramPack sos = estimate_sum_of_states(gb.family, {{"H", op}}, cfg);
    for (double rcond : {1e-9, 1e-11, 1e-13}) {
        AssemblyPolicy pol;
        pol.kind = AssemblyPolicy::Kind::pinv;
        pol.rcond = rcond;
        std::ostringstream label;
        label << "sos+pinv:" << std::scientific << std::setprecision(0) << rcond;
        timed(label.str(), samples, [&] { return assemble_rayleigh(sos, pol); });
    }
    timed("exact+xp", 0, [&] {
        AssemblyPolicy pol;
        pol.digits = digits;
        return assemble_rayleigh(exact_pack, pol);
    });

    std::ostringstream csv;
    csv << "estimator,samples,wall_seconds,final_bridge_infidelity\n";
    std::cout << "estimator                samples   wall[s]   final infidelity\n";
    for (const auto& r : rows) {
        csv << r.label << "," << r.samples << "," << fmt_double(r.wall_s) << ","
            << fmt_double(r.final_infidelity) << "\n";
        std::ostringstream line;
        line << std::left << std::setw(24) << r.label << std::right << std::setw(8)
             << r.samples << std::setw(10) << std::setprecision(3) << r.wall_s
             << std::setw(19) << std::setprecision(3) << std::scientific
             << r.final_infidelity;
        std::cout << line.str() << "\n";
    }
    write_text(out_dir / "bench-estimators.csv", csv.str());

    json cfgj = model.describe();
    cfgj["delta"] = delta;
    cfgj["steps"] = steps;
    cfgj["samples"] = samples;
    cfgj["seed"] = seed;
    write_config_snapshot(out_dir, "bench-estimators", cfgj);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"determinant-state subspace toolkit for spin models"};
    app.require_subcommand(1);
    // --h is a physics flag here; help is long-form only.
    app.set_help_flag("--help", "print help");
    std::string out_dir_text = default_out_dir().string();
    app.add_option("--out-dir", out_dir_text, "output directory (env DETSPACE_OUT)")
        ->capture_default_str();
    auto add_cmd = [&app](const std::string& name, const std::string& desc) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        cmd->set_help_flag("--help", "print help");
        cmd->fallthrough();   // lets --out-dir appear after the subcommand
        return cmd;
    };

    // model
    auto* model_cmd = add_cmd("model", "build an operator, optionally dump it");
    ModelFlags model_flags;
    model_flags.attach(model_cmd);
    bool dump = false;
    std::string save_op;
    model_cmd->add_flag("--dump", dump, "print the dense matrix as CSV");
    model_cmd->add_option("--save-op", save_op, "write the operator spec JSON");

    // generate-basis
    auto* gen_cmd = add_cmd("generate-basis", "discretized evolution basis");
    ModelFlags gen_model;
    gen_model.attach(gen_cmd);
    double delta = 0.05;
    int steps = 10;
    std::string scheme = "trotter2", noise = "none", psi0_file;
    std::uint64_t gen_seed = 1;
    gen_cmd->add_option("--delta", delta, "time step")->capture_default_str();
    gen_cmd->add_option("--steps", steps, "number of steps")->capture_default_str();
    gen_cmd->add_option("--scheme", scheme, "exact|taylorK|lpeK|slpe2|trotter2")
        ->capture_default_str();
    gen_cmd->add_option("--noise", noise, "none or g:<eps>")->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "noise seed")->capture_default_str();
    gen_cmd->add_option("--psi0", psi0_file, "initial state qsv (default: uniform)");

    // rayleigh
    auto* ray_cmd = add_cmd("rayleigh", "estimate the Rayleigh matrix");
    ModelFlags ray_model;
    ray_model.attach(ray_cmd);
    std::string ray_family, ray_manifest, ray_estimator = "det", ray_policy = "xp:200";
    std::string ray_imag = "keep", ray_out = "rayleigh.json", ray_pack_out;
    int ray_samples = 10000, ray_chains = 4, ray_thin = 1, ray_workers = 1, ray_xp = 200;
    long ray_burn = -1;
    std::uint64_t ray_seed = 1;
    ray_cmd->add_option("--family", ray_family, "comma list of qsv files");
    ray_cmd->add_option("--manifest", ray_manifest, "basis manifest (overrides --family/--op)");
    ray_cmd->add_option("--estimator", ray_estimator, "det|sos|exact")->capture_default_str();
    ray_cmd->add_option("--policy", ray_policy, "xp:<digits> or pinv:<rcond>")
        ->capture_default_str();
    ray_cmd->add_option("--imag", ray_imag, "keep|discard")->capture_default_str();
    ray_cmd->add_option("--samples", ray_samples, "total Monte Carlo samples")
        ->capture_default_str();
    ray_cmd->add_option("--chains", ray_chains, "chain count")->capture_default_str();
    ray_cmd->add_option("--burn-in", ray_burn, "burn-in proposals (-1: 10*n*m)")
        ->capture_default_str();
    ray_cmd->add_option("--thin", ray_thin, "proposals between samples")->capture_default_str();
    ray_cmd->add_option("--seed", ray_seed, "master seed")->capture_default_str();
    ray_cmd->add_option("--workers", ray_workers, "sampler worker threads")
        ->capture_default_str();
    ray_cmd->add_option("--xp-digits", ray_xp, "extended digits for exact packs")
        ->capture_default_str();
    ray_cmd->add_option("--out", ray_out, "output JSON name")->capture_default_str();
    ray_cmd->add_option("--pack-out", ray_pack_out, "also write the Gram pack JSON");

    // bridge
    auto* bridge_cmd = add_cmd("bridge", "post-process a basis into a trajectory");
    std::string bridge_manifest, bridge_rayleigh, bridge_out = "traj.csv", bridge_traj_json;
    int grid_refine = 10, bridge_digits = 200;
    double extrapolate = 0.0;
    bridge_cmd->add_option("--manifest", bridge_manifest, "basis manifest")->required();
    bridge_cmd->add_option("--rayleigh", bridge_rayleigh, "rayleigh JSON")->required();
    bridge_cmd->add_option("--grid-refine", grid_refine, "interior points per basis step")
        ->capture_default_str();
    bridge_cmd->add_option("--extrapolate", extrapolate, "extra horizon as a fraction")
        ->capture_default_str();
    bridge_cmd->add_option("--digits", bridge_digits, "working decimal digits")
        ->capture_default_str();
    bridge_cmd->add_option("--out", bridge_out, "CSV output name")->capture_default_str();
    bridge_cmd->add_option("--traj-json", bridge_traj_json, "also write the full trajectory");

    // gs-interpolate
    auto* gs_cmd = add_cmd("gs-interpolate", "ground-state interpolation curve");
    std::string gs_family, gs_parts, gs_grid = "0.5:2.0:50", gs_out = "curve.csv";
    gs_cmd->add_option("--family", gs_family, "comma list of qsv files")->required();
    gs_cmd->add_option("--parts", gs_parts, "comma list of operator JSON files")->required();
    gs_cmd->add_option("--grid", gs_grid, "start:end:count for the last coefficient")
        ->capture_default_str();
    gs_cmd->add_option("--out", gs_out, "CSV output name")->capture_default_str();

    // distance
    auto* dist_cmd = add_cmd("distance", "subspace distance between two families");
    std::string dist_a, dist_b, dist_estimator = "exact";
    int dist_samples = 20000, dist_chains = 4;
    std::uint64_t dist_seed = 1;
    dist_cmd->add_option("--family-a", dist_a, "comma list of qsv files")->required();
    dist_cmd->add_option("--family-b", dist_b, "comma list of qsv files")->required();
    dist_cmd->add_option("--estimator", dist_estimator, "exact|mc")->capture_default_str();
    dist_cmd->add_option("--samples", dist_samples, "MC samples")->capture_default_str();
    dist_cmd->add_option("--chains", dist_chains, "MC chains")->capture_default_str();
    dist_cmd->add_option("--seed", dist_seed, "MC seed")->capture_default_str();

    // excited
    auto* exc_cmd = add_cmd("excited", "Ritz values/vectors from a family");
    ModelFlags exc_model;
    exc_model.attach(exc_cmd);
    std::string exc_family, exc_manifest, exc_estimator = "exact", exc_policy = "xp:200";
    std::string exc_out = "ritz.json";
    int exc_samples = 20000, exc_chains = 4;
    std::uint64_t exc_seed = 1;
    bool exc_mx = false;
    exc_cmd->add_option("--family", exc_family, "comma list of qsv files");
    exc_cmd->add_option("--manifest", exc_manifest, "basis manifest");
    exc_cmd->add_option("--estimator", exc_estimator, "exact|det|sos")->capture_default_str();
    exc_cmd->add_option("--policy", exc_policy, "assembly policy for sos")
        ->capture_default_str();
    exc_cmd->add_option("--samples", exc_samples, "MC samples")->capture_default_str();
    exc_cmd->add_option("--chains", exc_chains, "MC chains")->capture_default_str();
    exc_cmd->add_option("--seed", exc_seed, "MC seed")->capture_default_str();
    exc_cmd->add_flag("--observable-mx", exc_mx, "also report per-Ritz-vector Mx");
    exc_cmd->add_option("--out", exc_out, "output JSON name")->capture_default_str();

    // bench-estimators
    auto* bench_cmd = add_cmd("bench-estimators",
                                         "estimator comparison on a fine-step basis");
    ModelFlags bench_model;
    bench_model.attach(bench_cmd);
    double bench_delta = 0.01;
    int bench_steps = 25, bench_samples = 20000, bench_digits = 200;
    std::uint64_t bench_seed = 1;
    bench_cmd->add_option("--delta", bench_delta, "basis time step")->capture_default_str();
    bench_cmd->add_option("--steps", bench_steps, "basis steps")->capture_default_str();
    bench_cmd->add_option("--samples", bench_samples, "samples per estimator")
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench_seed, "sampler seed")->capture_default_str();
    bench_cmd->add_option("--digits", bench_digits, "working decimal digits")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const fs::path out_dir = out_dir_text;
    try {
        if (model_cmd->parsed()) return cmd_model(model_flags, dump, save_op, out_dir);
        if (gen_cmd->parsed())
            return cmd_generate_basis(gen_model, delta, steps, scheme, noise, gen_seed,
                                      psi0_file, out_dir);
        if (ray_cmd->parsed())
            return cmd_rayleigh(ray_family, ray_manifest, ray_model, ray_estimator,
                                ray_policy, ray_imag, ray_samples, ray_chains, ray_burn,
                                ray_thin, ray_seed, ray_workers, ray_xp, ray_out,
                                ray_pack_out, out_dir);
        if (bridge_cmd->parsed())
            return cmd_bridge(bridge_manifest, bridge_rayleigh, grid_refine, extrapolate,
                              bridge_digits, bridge_out, bridge_traj_json, out_dir);
        if (gs_cmd->parsed())
            return cmd_gs_interpolate(gs_family, gs_parts, gs_grid, gs_out, out_dir);
        if (dist_cmd->parsed())
            return cmd_distance(dist_a, dist_b, dist_estimator, dist_samples, dist_chains,
                                dist_seed, out_dir);
        if (exc_cmd->parsed())
            return cmd_excited(exc_family, exc_manifest, exc_model, exc_estimator,
                               exc_policy, exc_samples, exc_chains, exc_seed, exc_mx,
                               exc_out, out_dir);
        if (bench_cmd->parsed())
            return cmd_bench(bench_model, bench_delta, bench_steps, bench_samples,
                             bench_seed, bench_digits, out_dir);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
