// Integration tests driving the installed CLI binary end to end.
// BISPEC_CLI and BISPEC_PRESETS come in as compile definitions from CMake.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "bispec/bispec.hpp"
#include "bispec/io.hpp"

namespace fs = std::filesystem;
using namespace bispec;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BISPEC_CLI) + " " + args + " 2>/dev/null >/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("bispec_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const char* name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("generate subcommand") {
    Scratch tmp;
    SECTION("writes a csv with one row per sample") {
        REQUIRE(run_cli("generate --n 128 --band-width 64 --seed 7 --out " + (tmp / "sig.csv")) == 0);
        const std::string text = slurp(tmp / "sig.csv");
        REQUIRE(std::count(text.begin(), text.end(), '\n') == 129);  // header + 128 rows
        REQUIRE(text.rfind("index,re,im\n", 0) == 0);
    }
    SECTION("repeated invocations are byte-identical") {
        REQUIRE(run_cli("generate --n 32 --band-width 16 --seed 9 --out " + (tmp / "a.json")) == 0);
        REQUIRE(run_cli("generate --n 32 --band-width 16 --seed 9 --out " + (tmp / "b.json")) == 0);
        REQUIRE(slurp(tmp / "a.json") == slurp(tmp / "b.json"));
    }
    SECTION("invalid support exits 2") {
        REQUIRE(run_cli("generate --n 128 --band-width 200 --seed 1 --out " + (tmp / "bad.csv")) == 2);
    }
}

TEST_CASE("bispectrum, cumulant and recover round trip") {
    Scratch tmp;
    REQUIRE(run_cli("generate --n 32 --band-width 16 --seed 11 --out " + (tmp / "sig.json")) == 0);
    REQUIRE(run_cli("bispectrum --in " + (tmp / "sig.json") + " --out " + (tmp / "bf.json")) == 0);

    SECTION("cumulant writes the grid csv") {
        REQUIRE(run_cli("cumulant --in " + (tmp / "sig.json") + " --out " + (tmp / "cum.csv")) == 0);
        REQUIRE(slurp(tmp / "cum.csv").rfind("n1,n2,re,im\n", 0) == 0);
    }

    SECTION("oracle method recovers the signal") {
        REQUIRE(run_cli("recover --bf " + (tmp / "bf.json") + " --method oracle --band-width 16 --ref " +
                        (tmp / "sig.json") + " --out " + (tmp / "rec.json")) == 0);
        const io::json summary = io::json::parse(slurp(tmp / "rec.summary.json"));
        REQUIRE(summary.at("dist").get<double>() <= 1e-8);
        REQUIRE(fs::exists(tmp.dir / "rec.spectrum.csv"));
    }

    SECTION("trust-region method reports iterations and the final objective") {
        REQUIRE(run_cli("recover --bf " + (tmp / "bf.json") + " --method trust-region --ref " + (tmp / "sig.json") +
                        " --out " + (tmp / "tr.json")) == 0);
        const io::json summary = io::json::parse(slurp(tmp / "tr.summary.json"));
        REQUIRE(summary.contains("iterations"));
        REQUIRE(summary.contains("final_h"));
        REQUIRE(summary.at("dist").get<double>() <= 1e-6);
        REQUIRE(slurp(tmp / "tr.trace.csv").rfind("iter,h,step_norm,alpha,delta\n", 0) == 0);
    }

    SECTION("spectral-init method writes a recovered signal") {
        REQUIRE(run_cli("recover --bf " + (tmp / "bf.json") + " --method spectral-init --out " + (tmp / "si.csv")) ==
                0);
        const Signal rec = io::signal_from_csv(slurp(tmp / "si.csv"), Domain::Time);
        REQUIRE(rec.n() == 32);
    }

    SECTION("malformed bispectrum file exits 2") {
        std::ofstream(tmp.dir / "broken.json") << "{ not json";
        REQUIRE(run_cli("recover --bf " + (tmp / "broken.json") + " --out " + (tmp / "x.json")) == 2);
    }

    SECTION("degenerate grid exits 3") {
        BispectrumGrid zeros(8);
        io::write_file_atomic(tmp.dir / "zeros.json", io::grid_to_json(zeros).dump());
        REQUIRE(run_cli("recover --bf " + (tmp / "zeros.json") + " --method spectral-init --out " +
                        (tmp / "z.json")) == 3);
    }

    SECTION("solver divergence exits 3 with the trace still written") {
        BispectrumGrid huge(8);
        for (cd& z : huge.entries) z = cd(1e200, 0.0);  // objective overflows at the init point
        io::write_file_atomic(tmp.dir / "huge.json", io::grid_to_json(huge).dump());
        REQUIRE(run_cli("recover --bf " + (tmp / "huge.json") + " --method trust-region --out " +
                        (tmp / "h.json")) == 3);
        REQUIRE(slurp(tmp / "h.trace.csv").rfind("iter,h,step_norm,alpha,delta\n", 0) == 0);
    }
}

TEST_CASE("sweep subcommand on the smoke preset") {
    Scratch tmp;
    const std::string preset = std::string(BISPEC_PRESETS) + "/smoke.json";
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run_cli("sweep --config " + preset + " --out " + (tmp / "smoke.csv")) == 0);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(elapsed < 10.0);

    const std::string csv = slurp(tmp / "smoke.csv");
    REQUIRE(csv.rfind("axis1,axis2,trials,mean_dist_init,mean_dist_final,success_rate,mean_iters,mean_wall_ms\n",
                      0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 2x2 cells
    REQUIRE(fs::exists(tmp.dir / "smoke.json"));  // json mirror

    SECTION("idempotent modulo nothing: identical csv on rerun") {
        REQUIRE(run_cli("sweep --config " + preset + " --out " + (tmp / "again.csv")) == 0);
        // wall-clock columns differ run to run; compare the seeded columns
        std::istringstream a(csv), b(slurp(tmp / "again.csv"));
        std::string la, lb;
        while (std::getline(a, la) && std::getline(b, lb)) {
            REQUIRE(la.substr(0, la.find_last_of(',')) == lb.substr(0, lb.find_last_of(',')));
        }
    }

    SECTION("unknown axis exits 2") {
        io::json j = io::json::parse(slurp(preset));
        j["axis1"]["name"] = "bogus";
        std::ofstream(tmp.dir / "bad.json") << j.dump();
        REQUIRE(run_cli("sweep --config " + (tmp / "bad.json") + " --out " + (tmp / "bad.csv")) == 2);
    }
}
