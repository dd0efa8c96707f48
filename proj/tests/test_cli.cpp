#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "stobas/dynamics.hpp"
#include "stobas/sparse.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / "stobas_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

int run(const std::string& args) {
    std::string cmd = std::string(STOBAS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::map<long long, double> read_state_csv(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line); // header
    std::map<long long, double> out;
    while (std::getline(is, line)) {
        auto comma = line.find(',');
        out[std::stoll(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
    }
    return out;
}

} // namespace

TEST_CASE("boxmodel curves hit the known limits") {
    Scratch s;
    int rc = run("--out-dir " + s.dir.string() +
                 " boxmodel --model metastable --eps-grid 1e-10 --out bm.csv");
    CHECK(rc == 0);
    std::ifstream is(s.dir / "bm.csv");
    std::string header, l0, l1;
    std::getline(is, header);
    std::getline(is, l0);
    std::getline(is, l1);
    CHECK(header == "eps,state,b_eps");
    auto value = [](const std::string& line) {
        auto pos = line.rfind(',');
        return std::stod(line.substr(pos + 1));
    };
    CHECK(std::fabs(value(l0) - 1.0 / 1.01) <= 1e-6);
    CHECK(std::fabs(value(l1) - 0.01 / 1.01) <= 1e-6);

    CHECK(run("boxmodel --model nonsense --out x.csv") == 2);
}

TEST_CASE("ulam identity writes the identity matrix and a manifest") {
    Scratch s;
    int rc = run("--out-dir " + s.dir.string() +
                 " ulam --system identity --lower 0 --upper 1 --counts 6 --periodic 1 "
                 "--samples 4 --out id.txt");
    CHECK(rc == 0);
    auto m = stobas::load_matrix((s.dir / "id.txt").string());
    CHECK(m.size() == 6);
    for (const auto& t : m.to_triplets()) {
        CHECK(t.row == t.col);
        CHECK(t.value == 1.0);
    }
    // metadata sidecar and manifest
    CHECK(fs::exists(s.dir / "id.txt.meta"));
    std::ifstream mf(s.dir / "ulam.manifest.json");
    REQUIRE(mf.good());
    auto manifest = nlohmann::json::parse(mf);
    CHECK(manifest["command"] == "ulam");
    CHECK(manifest["version"].is_string());
    CHECK(manifest["outputs"].size() == 2);

    CHECK(run("ulam --system identity --lower 1 --upper 0 --counts 4 --samples 2 --out x.txt") ==
          2);
}

TEST_CASE("committor modes and exit codes") {
    Scratch s;
    stobas::save_matrix(oracles::leak_chain(0.1), (s.dir / "m.txt").string());
    std::ofstream(s.dir / "a.txt") << "0\n";
    std::ofstream(s.dir / "b.txt") << "1\n";
    std::ofstream(s.dir / "overlap.txt") << "0\n1\n";

    // eps mode with eps = 1 returns the indicator of the target
    int rc = run("--out-dir " + s.dir.string() +
                 " committor --matrix m.txt --mode eps --target a.txt --eps 1 --out q.csv");
    CHECK(rc == 0);
    auto q = read_state_csv(s.dir / "q.csv");
    CHECK(q[0] == 1.0);
    CHECK(q[1] == 0.0);

    // normalized output divides by eps
    rc = run("--out-dir " + s.dir.string() +
             " committor --matrix m.txt --mode eps --target a.txt --eps 0.1 --normalized "
             "--out qn.csv");
    CHECK(rc == 0);
    auto qn = read_state_csv(s.dir / "qn.csv");
    CHECK(std::fabs(qn[0] - 0.1 / 0.19 / 0.1) <= 1e-10);

    // classical mode: everything reaches the absorbing state 1
    rc = run("--out-dir " + s.dir.string() +
             " committor --matrix m.txt --mode classical --target b.txt --out qc.csv");
    CHECK(rc == 0);
    auto qc = read_state_csv(s.dir / "qc.csv");
    CHECK(qc[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qc[1] == 1.0);

    // overlapping sets are a validation error
    rc = run("--out-dir " + s.dir.string() +
             " committor --matrix m.txt --mode between --target overlap.txt --target-b b.txt "
             "--out x.csv");
    CHECK(rc == 2);
}

TEST_CASE("ems subcommand") {
    Scratch s;
    stobas::save_matrix(oracles::leak_chain(0.1), (s.dir / "m.txt").string());
    std::ofstream(s.dir / "a.txt") << "0\n";
    int rc = run("--out-dir " + s.dir.string() +
                 " ems --matrix m.txt --target a.txt --horizon 10 --out s.csv");
    CHECK(rc == 0);
    auto sval = read_state_csv(s.dir / "s.csv");
    double expected = (1.0 - std::pow(0.9, 10.0)) / (10.0 * 0.1);
    CHECK(std::fabs(sval[0] - expected) <= 1e-10);
}

TEST_CASE("project subcommand emits the limit projection") {
    Scratch s;
    stobas::save_matrix(stobas::box_model_matrix(stobas::BoxModel::metastable, 0.01),
                        (s.dir / "m.txt").string());
    int rc = run("--out-dir " + s.dir.string() + " project --matrix m.txt --out p.txt");
    CHECK(rc == 0);
    auto p = stobas::load_matrix((s.dir / "p.txt").string(), 1e-8);
    CHECK(p.size() == 2);
    double p00 = 0.0;
    p.for_row(0, [&](stobas::Index j, double v) {
        if (j == 0) p00 = v;
    });
    CHECK(std::fabs(p00 - 1.0 / 1.01) <= 1e-8);
}

TEST_CASE("gbs argument validation and region parsing") {
    Scratch s;
    CHECK(run("gbs --system boxmodel:transient --region states:2 --samples 0 --out x.csv") == 1);
    CHECK(run("--out-dir " + s.dir.string() +
              " gbs --system boxmodel:transient --region blob:1 --samples 10 --out x.csv") == 2);
    int rc = run("--out-dir " + s.dir.string() +
                 " gbs --system boxmodel:transient --region states:2 --rules exp:0.25 "
                 "--samples 400 --out g.csv");
    CHECK(rc == 0);
    std::ifstream is(s.dir / "g.csv");
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "time_rule,param,sigma,b_hat,stderr,n_samples,n_failed");
    std::getline(is, row);
    CHECK(row.rfind("exponential,0.25,0,", 0) == 0);
}

TEST_CASE("diffest writes the difference curves") {
    Scratch s;
    int rc = run("--out-dir " + s.dir.string() +
                 " diffest --lambda 1.0 --n-grid \"10;100\" --out h.csv");
    CHECK(rc == 0);
    std::ifstream is(s.dir / "h.csv");
    std::string line;
    std::getline(is, line);
    CHECK(line == "re_lambda,im_lambda,N,h");
    int rows = 0;
    while (std::getline(is, line)) {
        auto pos = line.rfind(',');
        CHECK(std::stod(line.substr(pos + 1)) == 0.0); // lambda = 1 gives the zero column
        ++rows;
    }
    CHECK(rows == 2);
}

TEST_CASE("runs are reproducible from the recorded seed") {
    Scratch s;
    std::string base = " gbs --system boxmodel:metastable --region states:0 --rules exp:0.1 "
                       "--samples 1500 --out r.csv";
    CHECK(run("--out-dir " + s.dir.string() + " --seed 31" + base) == 0);
    std::ifstream f1(s.dir / "r.csv");
    std::stringstream c1;
    c1 << f1.rdbuf();
    CHECK(run("--out-dir " + s.dir.string() + " --seed 31" + base) == 0);
    std::ifstream f2(s.dir / "r.csv");
    std::stringstream c2;
    c2 << f2.rdbuf();
    CHECK(c1.str() == c2.str());
    CHECK(!c1.str().empty());
}

TEST_CASE("transient boxmodel curve reaches the attractor limit") {
    Scratch s;
    int rc = run("--out-dir " + s.dir.string() +
                 " boxmodel --model transient --eps-grid 1e-14 --out tr.csv");
    CHECK(rc == 0);
    std::ifstream is(s.dir / "tr.csv");
    std::string line;
    std::getline(is, line); // header
    double ba = 0.0;
    while (std::getline(is, line)) {
        auto first = line.find(',');
        auto second = line.find(',', first + 1);
        if (line.substr(first + 1, second - first - 1) == "2")
            ba = std::stod(line.substr(second + 1));
    }
    CHECK(ba >= 0.999999);
}

TEST_CASE("pendulum quick preset completes and reports exterior mass") {
    Scratch s;
    int rc = run("--out-dir " + s.dir.string() + " ulam --preset pendulum-quick --out p.txt");
    CHECK(rc == 0);
    std::ifstream meta(s.dir / "p.txt.meta");
    REQUIRE(meta.good());
    std::string line;
    bool saw_exterior = false, saw_counts = false;
    while (std::getline(meta, line)) {
        if (line.rfind("exterior_mass=", 0) == 0) saw_exterior = true;
        if (line == "counts=64,64") saw_counts = true;
    }
    CHECK(saw_exterior);
    CHECK(saw_counts);
}

TEST_CASE("diverging integration exits with the numerical-failure code") {
    Scratch s;
    // RK4 with an unstable step amplifies the damped mode past overflow
    int rc = run("--out-dir " + s.dir.string() +
                 " ulam --system pendulum --tau 40000 --dt 50 --lower -3.14,-20 "
                 "--upper 3.14,20 --counts 2,2 --samples 1 --out x.txt");
    CHECK(rc == 3);
}

TEST_CASE("per-system coupling and drive defaults") {
    // the pendulum keeps K = 1, P = 0.5 unless the flags are given; passing
    // those values explicitly must not change anything
    Scratch s;
    std::string common = " gbs --region ball:0.5236:0:0.5 --rules fixed:40 --samples 60";
    CHECK(run("--out-dir " + s.dir.string() + " --seed 5" + common +
              " --system pendulum --out a.csv") == 0);
    CHECK(run("--out-dir " + s.dir.string() + " --seed 5" + common +
              " --system pendulum --coupling 1 --drive 0.5 --out b.csv") == 0);
    std::ifstream fa(s.dir / "a.csv"), fb(s.dir / "b.csv");
    std::stringstream ca, cb;
    ca << fa.rdbuf();
    cb << fb.rdbuf();
    CHECK(ca.str() == cb.str());
    CHECK(!ca.str().empty());
}

TEST_CASE("help exits cleanly and unknown flags are usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("boxmodel --help") == 0);
    CHECK(run("boxmodel --model metastable --no-such-flag 1") == 1);
    CHECK(run("") == 1); // a subcommand is required
}
