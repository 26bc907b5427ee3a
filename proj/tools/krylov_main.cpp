// Experiment driver for the s-step GMRES library: generators, orthogonality
// sweeps, condition-number traces, and single solves with telemetry.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "krylov/gmres.hpp"
#include "krylov/harness.hpp"
#include "krylov/matgen.hpp"
#include "krylov/matrix_market.hpp"

namespace {

using namespace krylov;

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file " + path);
    return f;
}

CsrMatrix load_operator(const std::string& matrix_path, index_t grid, int stencil,
                        index_t grid3d) {
    if (!matrix_path.empty()) {
        std::ifstream f(matrix_path);
        if (!f) throw std::runtime_error("cannot open matrix file " + matrix_path);
        return read_matrix_market(f);
    }
    if (grid3d > 0) return gen_laplace3d(grid3d, grid3d, grid3d);
    if (grid == 0) throw std::runtime_error("either --matrix or --grid is required");
    return gen_laplace2d(grid, grid, stencil);
}

OrthoKind parse_scheme(const std::string& name) {
    if (name == "bcgs2-hhqr") return OrthoKind::Bcgs2Hhqr;
    if (name == "bcgs2-cholqr2") return OrthoKind::Bcgs2Cholqr2;
    if (name == "bcgs-pip2") return OrthoKind::BcgsPip2;
    if (name == "two-stage") return OrthoKind::TwoStage;
    throw CLI::ValidationError("--scheme", "unknown scheme '" + name + "'");
}

int run(int argc, char** argv) {
    CLI::App app{"s-step GMRES block-orthogonalization experiments"};
    app.require_subcommand(1);

    // ---- gen ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "materialize generator outputs");
    std::string gen_type = "laplace2d", gen_out = "out";
    index_t g_n = 100000, g_k = 5, g_panels = 12, g_nx = 100, g_ny = 0, g_nz = 0;
    int g_stencil = 5;
    double g_kappa = 1e7, g_growth = 2.0, g_coupling = 0.1;
    std::uint64_t g_seed = 1;
    gen->add_option("--type", gen_type, "logscaled|glued|laplace2d|laplace3d")
        ->check(CLI::IsMember({"logscaled", "glued", "laplace2d", "laplace3d"}));
    gen->add_option("--n", g_n, "rows for dense generators");
    gen->add_option("--k", g_k, "panel columns");
    gen->add_option("--panels", g_panels, "glued panel count");
    gen->add_option("--kappa", g_kappa, "target condition number");
    gen->add_option("--growth", g_growth, "glued prefix growth factor");
    gen->add_option("--coupling", g_coupling, "glued shared-direction coupling");
    gen->add_option("--nx", g_nx, "grid size x");
    gen->add_option("--ny", g_ny, "grid size y (default nx)");
    gen->add_option("--nz", g_nz, "grid size z (laplace3d; default nx)");
    gen->add_option("--stencil", g_stencil, "2D stencil: 5 or 9")
        ->check(CLI::IsMember({5, 9}));
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", gen_out, "output path prefix")->required();

    // ---- ortho-sweep ---------------------------------------------------
    auto* sweep = app.add_subcommand("ortho-sweep",
                                     "orthogonality error vs condition number sweep");
    OrthoSweepParams sp;
    std::string sweep_scheme = "cholqr2", sweep_out;
    sweep->add_option("--scheme", sweep_scheme, "cholqr2|bcgs-pip2")
        ->check(CLI::IsMember({"cholqr2", "bcgs-pip2"}));
    sweep->add_option("--n", sp.n, "panel rows");
    sweep->add_option("--k", sp.k, "panel columns");
    sweep->add_option("--panels", sp.panels, "glued panel count (bcgs-pip2 sweeps)");
    sweep->add_option("--coupling", sp.coupling, "glued coupling");
    sweep->add_option("--kappa-min", sp.kappa_min, "smallest target kappa");
    sweep->add_option("--kappa-max", sp.kappa_max, "largest target kappa");
    sweep->add_option("--seeds", sp.seeds, "number of seeds (1..seeds)");
    sweep->add_option("--out", sweep_out, "CSV output path")->required();

    // ---- glued-trace ----------------------------------------------------
    auto* gtrace = app.add_subcommand("glued-trace",
                                      "two-stage condition-number trace on glued input");
    GluedTraceParams gp;
    std::string gtrace_out;
    gtrace->add_option("--n", gp.n, "rows");
    gtrace->add_option("--m", gp.m, "total columns (restart length)");
    gtrace->add_option("--s", gp.s, "panel size");
    gtrace->add_option("--shat", gp.shat, "big panel size");
    gtrace->add_option("--kappa-panel", gp.kappa_panel, "per-panel condition number");
    gtrace->add_option("--growth", gp.growth, "prefix growth factor");
    gtrace->add_option("--coupling", gp.coupling, "shared-direction coupling");
    gtrace->add_option("--seeds", gp.seeds, "number of seeds (1..seeds)");
    gtrace->add_option("--out", gtrace_out, "CSV output path")->required();

    // ---- mpk-trace -------------------------------------------------------
    auto* mtrace = app.add_subcommand(
        "mpk-trace", "per-step condition numbers of MPK vectors through two-stage");
    MpkTraceParams mp;
    std::string mtrace_matrix, mtrace_out;
    index_t mtrace_grid = 0, mtrace_grid3d = 0;
    int mtrace_stencil = 5;
    bool mtrace_no_equil = false;
    mtrace->add_option("--matrix", mtrace_matrix, "MatrixMarket .mtx file");
    mtrace->add_option("--grid", mtrace_grid, "2D Laplace grid side instead of a file");
    mtrace->add_option("--grid3d", mtrace_grid3d, "3D Laplace grid side instead of a file");
    mtrace->add_option("--stencil", mtrace_stencil, "2D stencil: 5 or 9")
        ->check(CLI::IsMember({5, 9}));
    mtrace->add_option("--m", mp.m, "restart length");
    mtrace->add_option("--s", mp.s, "step size");
    mtrace->add_option("--shat", mp.shat, "big panel size");
    mtrace->add_option("--seed", mp.seed, "start vector seed");
    mtrace->add_flag("--no-equilibrate", mtrace_no_equil, "skip row/column equilibration");
    mtrace->add_option("--out", mtrace_out, "CSV output path")->required();

    // ---- solve -----------------------------------------------------------
    auto* solve = app.add_subcommand("solve", "run one GMRES solve with telemetry");
    std::string solve_matrix, solve_scheme = "bcgs-pip2", solve_out, solve_history;
    index_t solve_grid = 0, solve_grid3d = 0;
    int solve_stencil = 5;
    SolverConfig cfg;
    bool solve_equil = false;
    solve->add_option("--matrix", solve_matrix, "MatrixMarket .mtx file");
    solve->add_option("--grid", solve_grid, "2D Laplace grid side instead of a file");
    solve->add_option("--grid3d", solve_grid3d, "3D Laplace grid side instead of a file");
    solve->add_option("--stencil", solve_stencil, "2D stencil: 5 or 9")
        ->check(CLI::IsMember({5, 9}));
    solve->add_option("--scheme", solve_scheme,
                      "standard|bcgs2-hhqr|bcgs2-cholqr2|bcgs-pip2|two-stage")
        ->check(CLI::IsMember(
            {"standard", "bcgs2-hhqr", "bcgs2-cholqr2", "bcgs-pip2", "two-stage"}));
    solve->add_option("--m", cfg.restart_len, "restart length");
    solve->add_option("--s", cfg.step, "step size");
    solve->add_option("--shat", cfg.big_step, "second step size (two-stage)");
    solve->add_option("--tol", cfg.rel_tol, "relative residual tolerance");
    solve->add_option("--max-iters", cfg.max_iters, "iteration cap");
    solve->add_flag("--equilibrate", solve_equil, "equilibrate the operator first");
    solve->add_option("--out", solve_out, "JSON report path")->required();
    solve->add_option("--history", solve_history, "CSV per-cycle residual history path");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        if (g_ny == 0) g_ny = g_nx;
        if (g_nz == 0) g_nz = g_nx;
        if (gen_type == "logscaled") {
            LogscaledPanel panel = gen_logscaled(g_n, g_k, g_kappa, Seed{g_seed});
            write_dense_binary(gen_out + ".bin", panel.matrix);
            nlohmann::json side;
            side["type"] = "logscaled";
            side["rows"] = g_n;
            side["cols"] = g_k;
            side["kappa"] = g_kappa;
            side["seed"] = g_seed;
            side["planted_spectrum"] = panel.planted_sigma;
            open_out(gen_out + ".json") << side.dump(2) << '\n';
        } else if (gen_type == "glued") {
            GluedMatrix glued =
                gen_glued(g_n, g_panels, g_k, g_kappa, g_growth, g_coupling, Seed{g_seed});
            write_dense_binary(gen_out + ".bin", glued.matrix);
            nlohmann::json side;
            side["type"] = "glued";
            side["rows"] = g_n;
            side["cols"] = g_panels * g_k;
            side["panels"] = g_panels;
            side["panel_cols"] = g_k;
            side["kappa_panel"] = g_kappa;
            side["growth"] = g_growth;
            side["coupling"] = g_coupling;
            side["seed"] = g_seed;
            open_out(gen_out + ".json") << side.dump(2) << '\n';
        } else {
            CsrMatrix a = (gen_type == "laplace2d") ? gen_laplace2d(g_nx, g_ny, g_stencil)
                                                    : gen_laplace3d(g_nx, g_ny, g_nz);
            auto f = open_out(gen_out + ".mtx");
            write_matrix_market(f, a);
        }
        return 0;
    }

    if (sweep->parsed()) {
        sp.scheme = (sweep_scheme == "cholqr2") ? SweepScheme::CholQr2 : SweepScheme::BcgsPip2;
        auto rows = run_ortho_sweep(sp);
        auto f = open_out(sweep_out);
        write_ortho_sweep_csv(f, sp, rows);
        std::string summary = sweep_out;
        const auto dotpos = summary.rfind(".csv");
        summary = (dotpos == std::string::npos) ? summary + "_summary"
                                                : summary.substr(0, dotpos) + "_summary.csv";
        auto fs = open_out(summary);
        write_ortho_sweep_summary_csv(fs, sp, rows);
        return 0;
    }

    if (gtrace->parsed()) {
        auto rows = run_glued_trace(gp);
        auto f = open_out(gtrace_out);
        write_glued_trace_csv(f, gp, rows);
        return 0;
    }

    if (mtrace->parsed()) {
        CsrMatrix a = load_operator(mtrace_matrix, mtrace_grid, mtrace_stencil, mtrace_grid3d);
        mp.equilibrate_input = !mtrace_no_equil;
        auto rows = run_mpk_trace(a, mp);
        auto f = open_out(mtrace_out);
        write_mpk_trace_csv(f, a.n, mp, rows);
        return 0;
    }

    if (solve->parsed()) {
        CsrMatrix a = load_operator(solve_matrix, solve_grid, solve_stencil, solve_grid3d);
        if (solve_equil) a = equilibrate(a);
        const std::vector<double> b = gen_rhs_ones(a);
        SolveReport rep;
        if (solve_scheme == "standard") {
            rep = standard_gmres(a, b, {}, cfg);
        } else {
            cfg.scheme = OrthoScheme{parse_scheme(solve_scheme), cfg.effective_big_step()};
            rep = sstep_gmres(a, b, {}, cfg);
        }
        open_out(solve_out) << solve_report_json(rep, cfg, solve_scheme, a.n).dump(2) << '\n';
        if (!solve_history.empty()) {
            auto f = open_out(solve_history);
            write_residual_history_csv(f, solve_scheme, cfg, rep);
        }
        std::cerr << "status=" << solve_status_name(rep.status)
                  << " iters=" << rep.iterations
                  << " relres=" << fmt_sci(rep.final_relative_residual)
                  << " reduces=" << rep.sync.reduces << '\n';
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
