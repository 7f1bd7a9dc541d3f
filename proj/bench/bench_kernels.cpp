// Parallel kernels against their serial references. Prints one CSV row per
// kernel; `same` compares a fingerprint of the two results.
#include "dynkit/bifurcation.hpp"
#include "dynkit/chaos.hpp"
#include "dynkit/equilibria.hpp"
#include "dynkit/parallel.hpp"
#include "dynkit/periodic.hpp"
#include "dynkit/symbolic.hpp"
#include "dynkit/systems.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace dynkit;

namespace {

double time_ms(const std::function<double()>& f, double& fingerprint) {
    auto t0 = std::chrono::steady_clock::now();
    fingerprint = f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void bench(const char* name, const std::function<double()>& par, const std::function<double()>& ser) {
    double fp = 0, fs = 0;
    double tp = time_ms(par, fp);
    double ts = time_ms(ser, fs);
    std::printf("%s,%d,%.1f,%.1f,%.2f,%s\n", name, max_threads(), tp, ts, ts / tp, fp == fs ? "yes" : "no");
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace

int main() {
    std::printf("kernel,threads,parallel_ms,serial_ms,speedup,same\n");

    auto Ts = linspace(0.5, 6.0, 24), Om = linspace(0.1, 3.0, 24);
    auto hill_fp = [](const std::vector<HillGridPoint>& g) {
        double s = 0;
        for (const auto& p : g) s += p.max_entry_diff;
        return s;
    };
    bench("hill_grid", [&] { return hill_fp(hill_grid(Ts, Om)); }, [&] { return hill_fp(hill_grid_serial(Ts, Om)); });

    SystemDef logistic = build_builtin("logistic");
    auto casc_fp = [](const CascadeResult& r) {
        double s = 0;
        for (double l : r.lambdas) s += l;
        return s;
    };
    bench("cascade", [&] { return casc_fp(period_doubling_cascade(logistic, "lambda", 7)); },
          [&] { return casc_fp(period_doubling_cascade_serial(logistic, "lambda", 7)); });

    auto lambdas = linspace(2.5, 4.0, 1500);
    auto diag_fp = [](const Diagram& d) {
        double s = 0;
        for (const auto& p : d.points) s += p.second;
        return s;
    };
    bench("bifurcation_diagram", [&] { return diag_fp(bifurcation_diagram(logistic, "lambda", lambdas)); },
          [&] { return diag_fp(bifurcation_diagram_serial(logistic, "lambda", lambdas)); });

    auto tent_fp = [](const std::vector<PeriodicTentPoint>& v) { return double(v.size()); };
    bench("enumerate_periodic_tent", [&] { return tent_fp(enumerate_periodic_tent(14)); },
          [&] { return tent_fp(enumerate_periodic_tent_serial(14)); });

    HenonExperiment h = henon_attractor_experiment(1.4, 0.3, 200000);
    auto eps = geometric_ladder(2.0, 3, 9);
    auto dim_fp = [](const DimensionEstimate& d) { return d.slope; };
    bench("box_dimension", [&] { return dim_fp(box_dimension(h.points, eps)); },
          [&] { return dim_fp(box_dimension_serial(h.points, eps)); });

    SystemDef lorenz = build_builtin("lorenz");
    Vec x = Vec::Zero(3);
    x << 1, 1, 20;
    auto sens_fp = [](const SensitivityResult& r) {
        double s = 0;
        for (double t : r.divergence_times) s += t;
        return s;
    };
    bench("sensitivity", [&] { return sens_fp(sensitivity_test(lorenz, x, 1e-8, 1.0, 50.0, 16)); },
          [&] { return sens_fp(sensitivity_test_serial(lorenz, x, 1e-8, 1.0, 50.0, 16)); });

    std::vector<Vec> seeds;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            Vec s(3);
            s << -15 + 4.0 * i, -15 + 4.0 * j, 25;
            seeds.push_back(s);
        }
    auto fate_fp = [](const LorenzFates& f) { return f.mean_switches + f.to_cplus; };
    bench("lorenz_fates", [&] { return fate_fp(lorenz_orbit_fates(22.0, seeds, 300.0)); },
          [&] { return fate_fp(lorenz_orbit_fates_serial(22.0, seeds, 300.0)); });

    Vec lo(3), hi(3);
    lo << -20, -20, 0;
    hi << 20, 20, 40;
    auto eq_seeds = seed_grid(lo, hi, 9);
    auto eq_fp = [](const std::vector<EquilibriumReport>& v) { return double(v.size()); };
    bench("find_equilibria", [&] { return eq_fp(find_equilibria(lorenz, eq_seeds)); },
          [&] { return eq_fp(find_equilibria_serial(lorenz, eq_seeds)); });
}
