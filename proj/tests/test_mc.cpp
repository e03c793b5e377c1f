#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qsd/catalog.hpp"
#include "qsd/density_grid.hpp"
#include "qsd/mc.hpp"
#include "qsd/spectral.hpp"

using namespace qsd;
using std::numbers::pi;

namespace {

InitialSampler spectral_start(const EigenResult& res) {
    return GridDensityQuantile(res.grid, res.qsd_density);
}

}  // namespace

TEST_CASE("survival from the QSD start decays like e^{-lambda T}", "[mc]") {
    const auto model = make_model("brownian");
    const Interval iv{0.0, 1.0};
    const auto spec = solve_ground_state(model, iv, 2000);

    McConfig cfg;
    cfg.step.dt = 1e-4;
    cfg.bins = 30;
    cfg.seed = 64;
    cfg.workers = 2;
    const auto res = conditioned_law_mc(ZeroDrift{}, iv, spectral_start(spec), 0.5, 40000, cfg);
    const double expected = std::exp(-spec.lambda * 0.5);
    INFO("survival=" << res.survival << " expected=" << expected
                     << " se=" << res.survival_std_error);
    CHECK(std::abs(res.survival - expected) < 3.0 * res.survival_std_error + 2e-3);

    // quasi-stationarity: the survivor law is still the QSD
    const Histogram start = bin_grid_density(spec.grid, spec.qsd_density,
                                             uniform_edges(iv.lo, iv.hi, cfg.bins));
    CHECK(distance_tv(res.histogram, start) < 0.05);
}

TEST_CASE("log-survival is linear in T with slope -lambda", "[mc]") {
    const auto model = make_model("brownian");
    const Interval iv{0.0, 1.0};
    const auto spec = solve_ground_state(model, iv, 2000);
    McConfig cfg;
    cfg.step.dt = 1e-3;
    cfg.seed = 99;
    cfg.workers = 2;
    const double ts[3] = {0.25, 0.5, 1.0};
    double logs[3];
    for (int i = 0; i < 3; ++i) {
        const auto r = conditioned_law_mc(ZeroDrift{}, iv, spectral_start(spec), ts[i], 100000, cfg);
        logs[i] = std::log(r.survival);
    }
    // least-squares slope through the three points
    const double tbar = (ts[0] + ts[1] + ts[2]) / 3.0;
    const double ybar = (logs[0] + logs[1] + logs[2]) / 3.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        num += (ts[i] - tbar) * (logs[i] - ybar);
        den += (ts[i] - tbar) * (ts[i] - tbar);
    }
    const double slope = num / den;
    CHECK(slope == Catch::Approx(-spec.lambda).epsilon(0.05));
}

TEST_CASE("deep conditioning raises survivor starvation", "[mc]") {
    const Interval iv{0.0, 1.0};
    McConfig cfg;
    cfg.step.dt = 1e-3;
    cfg.seed = 5;
    CHECK_THROWS_AS(conditioned_law_mc(ZeroDrift{}, iv, uniform_init(iv), 3.0, 2000, cfg),
                    SurvivorStarvationError);
}

TEST_CASE("argument validation", "[mc]") {
    const Interval iv{0.0, 1.0};
    McConfig cfg;
    CHECK_THROWS_AS(conditioned_law_mc(ZeroDrift{}, iv, uniform_init(iv), 0.0, 10000, cfg),
                    ValidationError);
    CHECK_THROWS_AS(conditioned_law_mc(ZeroDrift{}, iv, uniform_init(iv), 1.0, 10, cfg),
                    ValidationError);
}

TEST_CASE("results are identical for any worker count", "[mc]") {
    const Interval iv{0.0, 1.0};
    McConfig cfg;
    cfg.step.dt = 1e-3;
    cfg.seed = 123;
    cfg.bins = 25;
    cfg.workers = 1;
    const auto a = conditioned_law_mc(ZeroDrift{}, iv, uniform_init(iv), 0.5, 20000, cfg);
    cfg.workers = 3;
    const auto b = conditioned_law_mc(ZeroDrift{}, iv, uniform_init(iv), 0.5, 20000, cfg);
    CHECK(a.survivors == b.survivors);
    REQUIRE(a.histogram.masses == b.histogram.masses);  // bitwise
}
