#include <catch2/catch_amalgamated.hpp>

#include "bispec/bispec.hpp"
#include "bispec/io.hpp"
#include "test_oracles.hpp"

using namespace bispec;

TEST_CASE("dist metric") {
    const Signal x = generate_gaussian_spectrum(8, band_limited_at_origin(8, 4), RngSeed{2});

    SECTION("dist(x, x) = 0") { REQUIRE(dist(x, x) == 0.0); }
    SECTION("dist(x, 0) = 1") {
        REQUIRE(dist(x, Signal::time(cvec(8, cd(0, 0)))) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("dist(x, -x) = 2: negation flips the whole bispectrum") {
        Signal neg = x;
        for (cd& z : neg.values) z = -z;
        REQUIRE(dist(x, neg) == Catch::Approx(2.0).margin(1e-10));
    }
    SECTION("zero reference rejected") {
        const Signal zero = Signal::time(cvec(8, cd(0, 0)));
        REQUIRE_THROWS_AS(dist(zero, x), std::invalid_argument);
    }
    SECTION("half-period shift is invisible, other shifts are not") {
        // y -> y .* (-1)^k preserves every entry of the bispectrum
        cvec y = dft(x).values;
        for (std::size_t k = 0; k < 8; ++k)
            if (k % 2 == 1) y[k] = -y[k];
        REQUIRE(dist(x, idft(Signal::frequency(y))) <= 1e-12);
        cvec shifted(8);
        for (std::size_t i = 0; i < 8; ++i) shifted[i] = x.values[(i + 7) % 8];
        REQUIRE(dist(x, Signal::time(shifted)) > 1e-3);
    }
}

TEST_CASE("run_trial") {
    SECTION("deterministic apart from wall time") {
        TrialConfig cfg;
        cfg.n = 32;
        cfg.band_width = 16;
        cfg.snr_db = 20.0;
        cfg.removal_fraction = 0.25;
        cfg.solver.q = 32;
        cfg.solver.max_iter = 50;
        cfg.seed = RngSeed{5};
        const TrialReport a = run_trial(cfg);
        const TrialReport b = run_trial(cfg);
        REQUIRE(a.dist_init == b.dist_init);
        REQUIRE(a.dist_final == b.dist_final);
        REQUIRE(a.success == b.success);
        REQUIRE(a.iterations == b.iterations);
    }
    SECTION("perturbed with delta = 0 starts at the truth and always succeeds") {
        for (unsigned seed = 0; seed < 5; ++seed) {
            TrialConfig cfg;
            cfg.n = 32;
            cfg.band_width = 16;
            cfg.init_mode = InitMode::Perturbed;
            cfg.delta = 0.0;
            cfg.solver.q = 32;
            cfg.seed = RngSeed{seed};
            const TrialReport r = run_trial(cfg);
            REQUIRE(r.dist_init == 0.0);
            REQUIRE(r.success);
        }
    }
    SECTION("noiseless complete spectral init succeeds") {
        TrialConfig cfg;
        cfg.n = 32;
        cfg.band_width = 16;
        cfg.solver.q = 32;
        cfg.seed = RngSeed{123};
        REQUIRE(run_trial(cfg).success);
    }
    SECTION("invalid removal fraction rejected") {
        TrialConfig cfg;
        cfg.removal_fraction = 1.5;
        REQUIRE_THROWS_AS(run_trial(cfg), std::invalid_argument);
    }
}

TEST_CASE("run_sweep") {
    TrialConfig base;
    base.n = 32;
    base.band_width = 16;
    base.solver.q = 32;
    base.solver.max_iter = 50;
    base.seed = RngSeed{99};

    SECTION("trials = 1 rows equal single run_trial outputs") {
        const AxisSpec a1{"removal_fraction", {0.0, 0.25}};
        const AxisSpec a2{"snr_db", {std::numeric_limits<double>::infinity(), 20.0}};
        const auto rows = run_sweep(base, a1, a2, 1);
        REQUIRE(rows.size() == 4);
        std::size_t slot = 0;
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j, ++slot) {
                TrialConfig cfg = base;
                cfg.removal_fraction = a1.values[i];
                cfg.snr_db = a2.values[j];
                cfg.seed = derive_seed(base.seed, i, j, 0ull);
                const TrialReport r = run_trial(cfg);
                REQUIRE(rows[slot].mean_dist_final == r.dist_final);
                REQUIRE(rows[slot].success_rate == (r.success ? 1.0 : 0.0));
            }
        }
    }

    SECTION("boundary cell: perturbed, delta 0, removal 0, noiseless -> success rate exactly 1") {
        TrialConfig b2 = base;
        b2.init_mode = InitMode::Perturbed;
        const AxisSpec a1{"delta", {0.0}};
        const AxisSpec a2{"removal_fraction", {0.0}};
        const auto rows = run_sweep(b2, a1, a2, 20);
        REQUIRE(rows.size() == 1);
        REQUIRE(rows[0].success_rate == 1.0);
    }

    SECTION("aggregation equals an independent recomputation") {
        const AxisSpec a1{"removal_fraction", {0.25}};
        const AxisSpec a2{"snr_db", {20.0}};
        const std::size_t trials = 8;
        const auto rows = run_sweep(base, a1, a2, trials);
        double sum = 0;
        for (std::size_t k = 0; k < trials; ++k) {
            TrialConfig cfg = base;
            cfg.removal_fraction = 0.25;
            cfg.snr_db = 20.0;
            cfg.seed = derive_seed(base.seed, 0ull, 0ull, k);
            sum += run_trial(cfg).dist_final;
        }
        REQUIRE(rows[0].mean_dist_final == Catch::Approx(sum / trials).epsilon(1e-12));
    }

    SECTION("parallel execution reproduces the serial aggregate") {
        const AxisSpec a1{"removal_fraction", {0.0, 0.5}};
        const AxisSpec a2{"snr_db", {20.0}};
        const auto serial = run_sweep(base, a1, a2, 4, 1);
        const auto parallel = run_sweep(base, a1, a2, 4, 4);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            REQUIRE(serial[i].mean_dist_init == parallel[i].mean_dist_init);
            REQUIRE(serial[i].mean_dist_final == parallel[i].mean_dist_final);
            REQUIRE(serial[i].success_rate == parallel[i].success_rate);
        }
    }

    SECTION("unknown axis rejected") {
        REQUIRE_THROWS_AS(run_sweep(base, AxisSpec{"bogus", {1.0}}, AxisSpec{"snr_db", {20.0}}, 1),
                          std::invalid_argument);
    }
}

TEST_CASE("sweep serialization") {
    TrialConfig base;
    base.n = 32;
    base.band_width = 16;
    base.solver.q = 32;
    base.solver.max_iter = 20;
    base.seed = RngSeed{7};
    const io::SweepConfig cfg{base, {"removal_fraction", {0.0, 0.25}}, {"snr_db", {20.0}}, 2};
    const auto rows = run_sweep(cfg.base, cfg.axis1, cfg.axis2, cfg.trials);

    SECTION("csv header matches the documented schema") {
        const std::string csv = io::sweep_to_csv(rows);
        REQUIRE(csv.rfind("axis1,axis2,trials,mean_dist_init,mean_dist_final,success_rate,mean_iters,mean_wall_ms\n",
                          0) == 0);
        REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
    SECTION("json mirror carries identical field names") {
        const io::json j = io::sweep_to_json(rows, cfg);
        REQUIRE(j.at("rows").size() == rows.size());
        for (const auto& row : j.at("rows"))
            for (const char* key : {"axis1", "axis2", "trials", "mean_dist_init", "mean_dist_final", "success_rate",
                                    "mean_iters", "mean_wall_ms"})
                REQUIRE(row.contains(key));
    }
    SECTION("config echo round trips") {
        const io::SweepConfig back = io::sweep_config_from_json(io::sweep_config_to_json(cfg));
        REQUIRE(back.trials == cfg.trials);
        REQUIRE(back.axis1.name == cfg.axis1.name);
        REQUIRE(back.axis1.values == cfg.axis1.values);
        REQUIRE(back.base.n == cfg.base.n);
        REQUIRE(back.base.seed.value == cfg.base.seed.value);
    }
}
