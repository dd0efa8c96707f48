// Command-line front end: builds Ulam transition matrices for the bundled
// systems, computes committor-type quantities and absorption-stability
// curves, runs sampling-based basin-stability experiments, and emits the
// mean-vs-geometric difference estimates. All outputs are CSV or plain text;
// every run writes a JSON manifest next to its outputs.

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "stobas/stobas.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stobas;

namespace {

struct GlobalOpts {
    uint64_t seed = 42;
    int threads = 0;
    std::string out_dir = ".";
};

fs::path resolve(const GlobalOpts& g, const std::string& name) {
    fs::path p(name);
    if (p.is_absolute()) return p;
    return fs::path(g.out_dir) / p;
}

void write_manifest(const GlobalOpts& g, const std::string& command,
                    const std::map<std::string, std::string>& flags,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["flags"] = flags;
    m["seed"] = g.seed;
    m["threads"] = g.threads;
    m["version"] = kVersion;
    m["outputs"] = outputs;
    fs::path path = resolve(g, command + ".manifest.json");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest " + path.string());
    os << m.dump(2) << '\n';
}

std::vector<double> parse_doubles(const std::string& s, char sep = ',') {
    std::vector<double> out;
    for (const std::string& tok : split(s, sep)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ValidationError("cannot parse number '" + tok + "'");
        }
    }
    return out;
}

std::vector<Index> parse_indices(const std::string& s) {
    std::vector<Index> out;
    for (double v : parse_doubles(s)) out.push_back(static_cast<Index>(v));
    return out;
}

std::vector<bool> parse_bool_flags(const std::string& s) {
    std::vector<bool> out;
    for (double v : parse_doubles(s)) out.push_back(v != 0.0);
    return out;
}

// "0.9", "-0.5+0.3i", "0.9i"
Complex parse_complex(std::string s) {
    if (s.empty()) throw ValidationError("empty eigenvalue");
    if (s.back() != 'i') return Complex(std::stod(s), 0.0);
    s.pop_back();
    size_t pos = s.find_last_of("+-");
    if (pos == std::string::npos || pos == 0)
        return Complex(0.0, s.empty() || s == "+" ? 1.0 : s == "-" ? -1.0 : std::stod(s));
    double re = std::stod(s.substr(0, pos));
    std::string imtok = s.substr(pos);
    double im = imtok == "+" ? 1.0 : imtok == "-" ? -1.0 : std::stod(imtok);
    return Complex(re, im);
}

std::vector<double> log_grid(double from, double to, int per_decade) {
    if (!(from > 0.0) || !(to > 0.0) || per_decade < 1)
        throw ValidationError("log grid needs positive endpoints");
    double lo = std::log10(std::min(from, to));
    double hi = std::log10(std::max(from, to));
    int steps = static_cast<int>(std::round((hi - lo) * per_decade));
    std::vector<double> out;
    for (int k = steps; k >= 0; --k)
        out.push_back(std::pow(10.0, lo + static_cast<double>(k) / per_decade));
    return out;
}

// --- bundled systems ----------------------------------------------------------

struct SystemBundle {
    std::string name;
    bool discrete = false;
    // continuous systems
    std::function<void(const Vec&, Vec&)> field;
    Index dim = 0;
    std::vector<bool> periodic;
    Vec wrap_lo, wrap_hi;
    std::function<Vec(double)> sigma_of; // per-coordinate noise from one scalar
    std::vector<std::string> labels;
    Vec base_state;           // reference state for perturbations
    Vec sample_lo, sample_hi; // default perturbation box
    bool perturb_around_base = false;
    std::function<bool(const Vec&)> center_mask; // ulam defaults
    std::function<bool(const Vec&)> sample_domain;
    // discrete systems
    std::optional<SparseStochasticMatrix> chain;
};

SystemBundle make_system(const std::string& name, double alpha, std::optional<double> coupling,
                         std::optional<double> drive, Index chain_n, double alpha_m, double beta,
                         double delta) {
    SystemBundle b;
    b.name = name;
    if (name == "pendulum") {
        PendulumParams p{alpha, coupling.value_or(1.0), drive.value_or(0.5)};
        b.field = [p](const Vec& x, Vec& dx) { pendulum_field(p, x, dx); };
        b.dim = 2;
        b.periodic = {true, false};
        b.wrap_lo = {-M_PI, -20.0};
        b.wrap_hi = {M_PI, 20.0};
        b.sigma_of = [](double s) { return Vec{0.0, s}; };
        b.labels = {"phi", "omega"};
        b.base_state = pendulum_fixed_point(p);
        b.sample_lo = {-M_PI, -20.0};
        b.sample_hi = {M_PI, 20.0};
    } else if (name == "pendulum-chain") {
        ChainParams p;
        p.n = chain_n;
        p.alpha = alpha;
        p.coupling = coupling.value_or(8.0);
        p.drive = drive.value_or(1.0);
        b.field = [p](const Vec& x, Vec& dx) { chain_field(p, x, dx); };
        b.dim = 2 * p.n;
        b.periodic.assign(static_cast<size_t>(2 * p.n), false);
        b.sigma_of = [n = p.n](double s) { return chain_frequency_sigma(n, s); };
        for (Index i = 0; i < p.n; ++i) b.labels.push_back("phi" + std::to_string(i));
        for (Index i = 0; i < p.n; ++i) b.labels.push_back("omega" + std::to_string(i));
        b.base_state = chain_sync_state(p);
        b.sample_lo.assign(static_cast<size_t>(2 * p.n), 0.0);
        b.sample_hi.assign(static_cast<size_t>(2 * p.n), 0.0);
        for (Index i = 0; i < p.n; ++i) {
            b.sample_lo[static_cast<size_t>(i)] = -M_PI;
            b.sample_hi[static_cast<size_t>(i)] = M_PI;
            b.sample_lo[static_cast<size_t>(p.n + i)] = -5.0;
            b.sample_hi[static_cast<size_t>(p.n + i)] = 5.0;
        }
        b.perturb_around_base = true;
    } else if (name == "anderies") {
        AnderiesParams p;
        p.alpha_m = alpha_m;
        p.alpha = alpha;
        p.beta = beta;
        p.nep = standin_nep();
        b.field = [p](const Vec& x, Vec& dx) { anderies_field(p, x, dx); };
        b.dim = 2;
        b.periodic = {false, false};
        b.sigma_of = [](double s) { return Vec{s, s}; };
        b.labels = {"cm", "ct"};
        b.base_state = {0.25, 0.25};
        b.sample_lo = {0.0, 0.0};
        b.sample_hi = {1.0, 1.0};
        b.center_mask = [](const Vec& c) { return c[0] + c[1] <= 1.0; };
        b.sample_domain = [](const Vec& x) {
            return x[0] >= 0.0 && x[1] >= 0.0 && x[0] + x[1] <= 1.0;
        };
    } else if (name == "identity") {
        b.field = [](const Vec& x, Vec& dx) { dx.assign(x.size(), 0.0); };
        b.dim = 0; // derived from the grid bounds
        b.sigma_of = [](double s) { return Vec{s}; };
    } else if (name == "boxmodel:metastable") {
        b.discrete = true;
        b.chain = box_model_matrix(BoxModel::metastable, delta > 0.0 ? delta : 0.01);
    } else if (name == "boxmodel:transient") {
        b.discrete = true;
        b.chain = box_model_matrix(BoxModel::transient, delta > 0.0 ? delta : 0.0001);
    } else {
        throw ValidationError("unknown system '" + name + "'");
    }
    return b;
}

void write_vector_csv(const fs::path& path, const char* value_name, const Vec& v) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    os << "state," << value_name << '\n' << std::setprecision(17);
    for (size_t i = 0; i < v.size(); ++i) os << i << ',' << v[i] << '\n';
}

// --- subcommands ----------------------------------------------------------------

int cmd_boxmodel(const GlobalOpts& g, const std::string& model, double delta,
                 const std::string& eps_grid, double eps_min, double eps_max, int per_decade,
                 const std::string& out) {
    if (model != "metastable" && model != "transient")
        throw ValidationError("model must be metastable or transient");
    BoxModel kind = model == "metastable" ? BoxModel::metastable : BoxModel::transient;
    if (delta <= 0.0) delta = kind == BoxModel::metastable ? 0.01 : 0.0001;
    auto m = box_model_matrix(kind, delta);
    auto rho = ProbabilityVector::uniform(m.size());
    std::vector<double> grid =
        eps_grid.empty() ? log_grid(eps_min, eps_max, per_decade) : parse_doubles(eps_grid);

    fs::path path = resolve(g, out);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    os << "eps,state,b_eps\n" << std::setprecision(17);
    for (double eps : grid)
        for (Index s = 0; s < m.size(); ++s) {
            double b = eps_absorption_stability(m, Region::boxes({s}), rho, eps);
            os << eps << ',' << s << ',' << b << '\n';
        }
    write_manifest(g, "boxmodel", {{"model", model}, {"delta", std::to_string(delta)}, {"out", out}},
                   {path.string()});
    return 0;
}

int cmd_ulam(const GlobalOpts& g, SystemBundle& sys, double tau, double dt, double sigma,
             const std::string& lower, const std::string& upper, const std::string& counts,
             const std::string& periodic, const std::string& mask, Index samples,
             const std::string& exterior, const std::string& out, const std::string& meta) {
    if (sys.discrete) throw ValidationError("ulam needs a continuous system");
    Vec lo = parse_doubles(lower);
    Vec hi = parse_doubles(upper);
    std::vector<Index> cnt = parse_indices(counts);
    std::vector<bool> per;
    if (!periodic.empty())
        per = parse_bool_flags(periodic);
    else if (sys.periodic.size() == lo.size())
        per = sys.periodic;
    else
        per.assign(lo.size(), false);

    std::function<bool(const Vec&)> center_mask, domain;
    if (mask == "simplex") {
        center_mask = [](const Vec& c) { return c[0] + c[1] <= 1.0; };
        domain = [](const Vec& x) { return x[0] >= 0.0 && x[1] >= 0.0 && x[0] + x[1] <= 1.0; };
    } else if (mask == "system") {
        center_mask = sys.center_mask;
        domain = sys.sample_domain;
    } else if (mask != "none") {
        throw ValidationError("mask must be none, simplex or system");
    }

    auto grid = build_partition(lo, hi, cnt, per, center_mask, domain);

    FlowMapSpec spec;
    spec.field = sys.field;
    spec.dim = static_cast<Index>(lo.size());
    spec.tau = tau;
    spec.dt = dt;
    if (sigma > 0.0) {
        spec.sigma = sys.sigma_of ? sys.sigma_of(sigma) : Vec(lo.size(), sigma);
        spec.sigma.resize(lo.size(), 0.0);
    }
    spec.periodic = per;
    spec.wrap_lo = lo;
    spec.wrap_hi = hi;

    if (exterior != "absorb" && exterior != "renormalize")
        throw ValidationError("exterior must be absorb or renormalize");
    ExteriorPolicy policy =
        exterior == "renormalize" ? ExteriorPolicy::renormalize : ExteriorPolicy::absorb;

    auto [matrix, report] =
        estimate_transition_matrix(grid, spec, samples, g.seed, policy, g.threads);
    if (report.exterior_mass > 0.01)
        std::cerr << "warning: " << report.exterior_mass * 100.0
                  << "% of samples left the partition\n";

    fs::path mpath = resolve(g, out);
    save_matrix(matrix, mpath.string());
    fs::path metapath = resolve(g, meta.empty() ? out + ".meta" : meta);
    write_ulam_metadata(metapath.string(), grid, spec, report, sys.name);
    write_manifest(g, "ulam",
                   {{"system", sys.name},
                    {"tau", std::to_string(tau)},
                    {"samples", std::to_string(samples)},
                    {"counts", counts},
                    {"out", out}},
                   {mpath.string(), metapath.string()});
    std::cout << "boxes=" << report.box_count << " matrix_size=" << report.matrix_size
              << " exterior_mass=" << report.exterior_mass << '\n';
    return 0;
}

int cmd_committor(const GlobalOpts& g, const std::string& matrix_file, const std::string& mode,
                  const std::string& target_file, const std::string& target_b_file,
                  const std::string& p1_file, const std::string& p2_file, double eps,
                  bool normalized, const std::string& out) {
    auto m = load_matrix(resolve(g, matrix_file).string());
    fs::path path = resolve(g, out);
    Vec q;
    if (mode == "classical") {
        auto region = load_region(resolve(g, target_file).string());
        q = committor_to(m, region).q;
    } else if (mode == "between") {
        auto a = load_region(resolve(g, target_file).string());
        auto b = load_region(resolve(g, target_b_file).string());
        q = committor_between(m, a, b).q;
    } else if (mode == "fuzzy") {
        Vec p1 = load_vector(resolve(g, p1_file).string());
        Vec p2 = load_vector(resolve(g, p2_file).string());
        q = fuzzy_committor(m, p1, p2).q;
    } else if (mode == "eps") {
        auto region = load_region(resolve(g, target_file).string());
        q = eps_committor(m, region, eps).q;
        if (normalized) scale(q, 1.0 / eps);
    } else {
        throw ValidationError("mode must be classical, between, fuzzy or eps");
    }
    write_vector_csv(path, "q", q);
    write_manifest(g, "committor",
                   {{"matrix", matrix_file},
                    {"mode", mode},
                    {"eps", std::to_string(eps)},
                    {"normalized", normalized ? "1" : "0"},
                    {"out", out}},
                   {path.string()});
    return 0;
}

int cmd_ems(const GlobalOpts& g, const std::string& matrix_file, const std::string& target_file,
            long long horizon, const std::string& out) {
    auto m = load_matrix(resolve(g, matrix_file).string());
    auto region = load_region(resolve(g, target_file).string());
    Vec s = ems_finite(m, region, horizon);
    fs::path path = resolve(g, out);
    write_vector_csv(path, "s", s);
    write_manifest(g, "ems",
                   {{"matrix", matrix_file}, {"horizon", std::to_string(horizon)}, {"out", out}},
                   {path.string()});
    return 0;
}

int cmd_project(const GlobalOpts& g, const std::string& matrix_file, double eps_floor,
                const std::string& out) {
    auto m = load_matrix(resolve(g, matrix_file).string());
    auto p = fixed_space_projection(m, eps_floor);
    fs::path path = resolve(g, out);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    // same triplet text layout as the sparse matrices, dropping exact zeros
    std::vector<Triplet> ts;
    for (Index i = 0; i < p.size(); ++i)
        for (Index j = 0; j < p.size(); ++j)
            if (p.values()(i, j) != 0.0) ts.push_back({i, j, p.values()(i, j)});
    os << p.size() << ' ' << ts.size() << '\n' << std::setprecision(17);
    for (const Triplet& t : ts) os << t.row << ' ' << t.col << ' ' << t.value << '\n';
    write_manifest(
        g, "project",
        {{"matrix", matrix_file}, {"eps_floor", std::to_string(eps_floor)}, {"out", out}},
        {path.string()});
    return 0;
}

int cmd_gbs(const GlobalOpts& g, SystemBundle& sys, const std::string& region_spec,
            const std::string& rule_kind, const std::string& horizons, const std::string& rules_raw,
            const std::string& eps_from_t, const std::string& sigma_grid, long long samples,
            double dt, const std::string& out) {
    std::vector<TimeRule> rules;
    if (!rules_raw.empty()) {
        for (const std::string& tok : split(rules_raw, ',')) {
            auto parts = split(tok, ':');
            if (parts.size() != 2) throw ValidationError("rule must look like fixed:500");
            double v = std::stod(parts[1]);
            if (parts[0] == "exp")
                rules.push_back(TimeRule::exponential(v));
            else if (parts[0] == "uniform")
                rules.push_back(TimeRule::uniform(v));
            else if (parts[0] == "fixed")
                rules.push_back(TimeRule::fixed(v));
            else
                throw ValidationError("rule kind must be exp, uniform or fixed");
        }
    } else {
        for (double t : parse_doubles(horizons)) {
            if (rule_kind == "uniform")
                rules.push_back(TimeRule::uniform(t));
            else if (rule_kind == "fixed")
                rules.push_back(TimeRule::fixed(t));
            else if (rule_kind == "exp")
                rules.push_back(
                    TimeRule::exponential(eps_from_t == "one-over" ? 1.0 / t : 2.0 / t));
            else
                throw ValidationError("rule-kind must be uniform, fixed or exp");
        }
    }
    std::vector<double> sigmas = parse_doubles(sigma_grid);

    std::vector<GbsSweepCell> cells;
    if (sys.discrete) {
        const auto& chain = *sys.chain;
        Region region = parse_region_spec(region_spec, 1, {});
        auto member = region_membership(region);
        auto sampler = chain_state_sampler(ProbabilityVector::uniform(chain.size()));
        auto factory = [&](double) { return DiscreteChainSystem{&chain}; };
        cells = gbs_sweep(factory, sampler, member, rules, sigmas, samples, g.seed, g.threads);
    } else {
        Region region = parse_region_spec(region_spec, sys.dim, sys.labels);
        auto member = region_membership(region);
        std::function<Vec(RngStream&)> sampler =
            sys.perturb_around_base
                ? perturbation_sampler(sys.base_state, sys.sample_lo, sys.sample_hi)
                : box_sampler(sys.sample_lo, sys.sample_hi);
        auto factory = [&](double s) {
            ContinuousSystem<std::function<void(const Vec&, Vec&)>> c{
                sys.field,     sys.dim,     dt,         s > 0.0 ? sys.sigma_of(s) : Vec{},
                sys.periodic,  sys.wrap_lo, sys.wrap_hi};
            return c;
        };
        cells = gbs_sweep(factory, sampler, member, rules, sigmas, samples, g.seed, g.threads);
    }

    fs::path path = resolve(g, out);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    os << "time_rule,param,sigma,b_hat,stderr,n_samples,n_failed\n" << std::setprecision(12);
    for (const auto& c : cells)
        os << c.rule.label() << ',' << c.rule.param() << ',' << c.sigma << ',' << c.estimate.b_hat
           << ',' << c.estimate.stderr_ << ',' << c.estimate.n_samples << ','
           << c.estimate.n_failed << '\n';
    write_manifest(g, "gbs",
                   {{"system", sys.name},
                    {"region", region_spec},
                    {"samples", std::to_string(samples)},
                    {"sigma_grid", sigma_grid},
                    {"out", out}},
                   {path.string()});
    return 0;
}

int cmd_diffest(const GlobalOpts& g, const std::string& lambdas_raw, const std::string& n_grid,
                const std::string& out) {
    std::vector<Complex> lambdas;
    for (const std::string& tok : split(lambdas_raw, ',')) lambdas.push_back(parse_complex(tok));
    std::vector<long long> horizons;
    for (double v : parse_doubles(n_grid, ';')) horizons.push_back(static_cast<long long>(v));
    fs::path path = resolve(g, out);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    difference_curve_sweep(lambdas, horizons, os);
    write_manifest(g, "diffest", {{"lambda", lambdas_raw}, {"n_grid", n_grid}, {"out", out}},
                   {path.string()});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic basins of attraction toolkit"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--threads", g.threads, "worker thread cap (0 = auto)");
    app.add_option("--out-dir", g.out_dir, "directory for outputs");

    // shared system flags
    std::string system_name = "pendulum";
    double alpha = 0.1, coupling = 1.0, drive = 0.5, alpha_m = 0.05, beta = 1.0, delta = 0.0;
    Index chain_n = 16;
    // per-system defaults for coupling/drive apply unless the flag was given
    std::map<CLI::App*, std::pair<CLI::Option*, CLI::Option*>> system_opts;
    auto add_system_flags = [&](CLI::App* cmd) {
        cmd->add_option("--system", system_name,
                        "pendulum, pendulum-chain, anderies, identity, boxmodel:metastable, "
                        "boxmodel:transient");
        cmd->add_option("--alpha", alpha, "damping");
        auto* copt = cmd->add_option("--coupling", coupling, "coupling strength K");
        auto* dopt = cmd->add_option("--drive", drive, "drive magnitude P");
        system_opts[cmd] = {copt, dopt};
        cmd->add_option("--n", chain_n, "number of chain oscillators");
        cmd->add_option("--alpha-m", alpha_m, "marine exchange rate");
        cmd->add_option("--beta", beta, "marine equilibrium ratio");
        cmd->add_option("--delta", delta, "box-model time-scale parameter");
    };
    auto passed_system_params = [&](CLI::App* cmd) {
        auto [copt, dopt] = system_opts[cmd];
        std::pair<std::optional<double>, std::optional<double>> out;
        if (copt->count() > 0) out.first = coupling;
        if (dopt->count() > 0) out.second = drive;
        return out;
    };

    // boxmodel
    auto* boxmodel =
        app.add_subcommand("boxmodel", "absorption-stability curves of the box models");
    std::string bm_model = "metastable", bm_eps_grid, bm_out = "boxmodel.csv";
    double bm_delta = 0.0, bm_eps_min = 1e-8, bm_eps_max = 1.0;
    int bm_per_decade = 4;
    boxmodel->add_option("--model", bm_model, "metastable or transient")->required();
    boxmodel->add_option("--delta", bm_delta, "time-scale parameter");
    boxmodel->add_option("--eps-grid", bm_eps_grid, "explicit comma-separated eps values");
    boxmodel->add_option("--eps-min", bm_eps_min, "log-grid lower end");
    boxmodel->add_option("--eps-max", bm_eps_max, "log-grid upper end");
    boxmodel->add_option("--eps-per-decade", bm_per_decade, "log-grid resolution");
    boxmodel->add_option("--out", bm_out, "output CSV");

    // ulam
    auto* ulam = app.add_subcommand("ulam", "estimate a transition matrix over a box partition");
    std::string ul_lower = "-3.14159265358979312,-20", ul_upper = "3.14159265358979312,20";
    std::string ul_counts = "64,64", ul_periodic, ul_mask = "none", ul_exterior = "absorb";
    std::string ul_out = "matrix.txt", ul_meta, ul_preset;
    double ul_tau = 1.0, ul_dt = 0.01, ul_sigma = 0.0;
    Index ul_samples = 100;
    add_system_flags(ulam);
    ulam->add_option("--preset", ul_preset,
                     "pendulum-quick | pendulum-full | carbon-quick | carbon-full");
    ulam->add_option("--tau", ul_tau, "flow time per step");
    ulam->add_option("--dt", ul_dt, "integrator step");
    ulam->add_option("--sigma", ul_sigma, "noise strength");
    ulam->add_option("--lower", ul_lower, "comma-separated lower bounds");
    ulam->add_option("--upper", ul_upper, "comma-separated upper bounds");
    ulam->add_option("--counts", ul_counts, "boxes per dimension");
    ulam->add_option("--periodic", ul_periodic, "per-dimension periodic flags (0/1)");
    ulam->add_option("--mask", ul_mask, "none, simplex or system");
    ulam->add_option("--samples", ul_samples, "sample points per box")->check(CLI::PositiveNumber);
    ulam->add_option("--exterior", ul_exterior, "absorb or renormalize");
    ulam->add_option("--out", ul_out, "matrix file");
    ulam->add_option("--meta", ul_meta, "metadata file (default <out>.meta)");

    // committor
    auto* committor = app.add_subcommand("committor", "committor-type quantities of a chain");
    std::string cm_matrix, cm_mode = "classical", cm_target, cm_target_b, cm_p1, cm_p2;
    std::string cm_out = "committor.csv";
    double cm_eps = 0.01;
    bool cm_normalized = false;
    committor->add_option("--matrix", cm_matrix, "transition matrix file")->required();
    committor->add_option("--mode", cm_mode, "classical, between, fuzzy or eps");
    committor->add_option("--target", cm_target, "region file (box indices or weights)");
    committor->add_option("--target-b", cm_target_b, "avoid-set region file (between mode)");
    committor->add_option("--p1", cm_p1, "exit-probability vector file (fuzzy mode)");
    committor->add_option("--p2", cm_p2, "second exit-probability vector file (fuzzy mode)");
    committor->add_option("--eps", cm_eps, "absorption rate (eps mode)");
    committor->add_flag("--normalized", cm_normalized, "emit q/eps instead of q");
    committor->add_option("--out", cm_out, "output CSV");

    // ems
    auto* ems = app.add_subcommand("ems", "finite-horizon expected mean sojourn times");
    std::string em_matrix, em_target, em_out = "ems.csv";
    long long em_horizon = 100;
    ems->add_option("--matrix", em_matrix, "transition matrix file")->required();
    ems->add_option("--target", em_target, "region file")->required();
    ems->add_option("--horizon", em_horizon, "number of steps N")->check(CLI::PositiveNumber);
    ems->add_option("--out", em_out, "output CSV");

    // project
    auto* project = app.add_subcommand("project", "fixed-space projection of a chain");
    std::string pr_matrix, pr_out = "projection.txt";
    double pr_eps_floor = 1e-12;
    project->add_option("--matrix", pr_matrix, "transition matrix file")->required();
    project->add_option("--eps-floor", pr_eps_floor, "resolvent evaluation point");
    project->add_option("--out", pr_out, "output matrix file");

    // gbs
    auto* gbs = app.add_subcommand("gbs", "sampling-based generalized basin stability");
    std::string gb_region, gb_rule_kind = "fixed", gb_horizons = "500", gb_rules, gb_sigma = "0";
    std::string gb_eps_from_t = "two-over", gb_out = "gbs.csv";
    long long gb_samples = 1000;
    double gb_dt = 0.01;
    add_system_flags(gbs);
    gbs->add_option("--region", gb_region, "region spec, e.g. all-abs-lt:omega:0.5")->required();
    gbs->add_option("--rule-kind", gb_rule_kind, "uniform, fixed or exp");
    gbs->add_option("--horizons", gb_horizons, "comma-separated horizons T");
    gbs->add_option("--rules", gb_rules, "explicit rules, e.g. fixed:500,exp:0.01");
    gbs->add_option("--eps-from-T", gb_eps_from_t,
                    "exp-rule rate from horizon: two-over (2/T) or one-over (1/T)");
    gbs->add_option("--sigma-grid", gb_sigma, "comma-separated noise strengths");
    gbs->add_option("--samples", gb_samples, "trials per cell")->check(CLI::PositiveNumber);
    gbs->add_option("--dt", gb_dt, "integrator step");
    gbs->add_option("--out", gb_out, "output CSV");

    // diffest
    auto* diffest = app.add_subcommand("diffest", "mean-vs-geometric difference estimates");
    std::string df_lambda, df_n = "10;100;1000;10000", df_out = "diffest.csv";
    diffest->add_option("--lambda", df_lambda, "eigenvalues, e.g. 0.999,0.99,0.5+0.5i")
        ->required();
    diffest->add_option("--n-grid", df_n, "semicolon-separated horizon values");
    diffest->add_option("--out", df_out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors are exit code 1, --help stays 0
    }

    try {
        fs::create_directories(g.out_dir);
        if (boxmodel->parsed())
            return cmd_boxmodel(g, bm_model, bm_delta, bm_eps_grid, bm_eps_min, bm_eps_max,
                                bm_per_decade, bm_out);
        if (ulam->parsed()) {
            if (ul_preset == "pendulum-quick") {
                system_name = "pendulum";
                ul_counts = "64,64";
                ul_samples = 100;
                ul_periodic = "1,0";
            } else if (ul_preset == "pendulum-full") {
                system_name = "pendulum";
                ul_counts = "256,256";
                ul_samples = 1000;
                ul_periodic = "1,0";
            } else if (ul_preset == "carbon-quick" || ul_preset == "carbon-full") {
                system_name = "anderies";
                ul_lower = "0,0";
                ul_upper = "1,1";
                ul_counts = "128,128";
                ul_samples = ul_preset == "carbon-quick" ? 100 : 400;
                ul_mask = "simplex";
                ul_periodic = "0,0";
            } else if (!ul_preset.empty()) {
                throw ValidationError("unknown preset '" + ul_preset + "'");
            }
            auto [opt_coupling, opt_drive] = passed_system_params(ulam);
            auto sys = make_system(system_name, alpha, opt_coupling, opt_drive, chain_n, alpha_m,
                                   beta, delta);
            return cmd_ulam(g, sys, ul_tau, ul_dt, ul_sigma, ul_lower, ul_upper, ul_counts,
                            ul_periodic, ul_mask, ul_samples, ul_exterior, ul_out, ul_meta);
        }
        if (committor->parsed())
            return cmd_committor(g, cm_matrix, cm_mode, cm_target, cm_target_b, cm_p1, cm_p2,
                                 cm_eps, cm_normalized, cm_out);
        if (ems->parsed()) return cmd_ems(g, em_matrix, em_target, em_horizon, em_out);
        if (project->parsed()) return cmd_project(g, pr_matrix, pr_eps_floor, pr_out);
        if (gbs->parsed()) {
            auto [opt_coupling, opt_drive] = passed_system_params(gbs);
            auto sys = make_system(system_name, alpha, opt_coupling, opt_drive, chain_n, alpha_m,
                                   beta, delta);
            return cmd_gbs(g, sys, gb_region, gb_rule_kind, gb_horizons, gb_rules, gb_eps_from_t,
                           gb_sigma, gb_samples, gb_dt, gb_out);
        }
        if (diffest->parsed()) return cmd_diffest(g, df_lambda, df_n, df_out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
