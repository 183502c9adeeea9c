#include "commands.hpp"

#include "riou/errors.hpp"
#include "riou/format.hpp"
#include "riou/losses.hpp"
#include "riou/regsim.hpp"
#include "riou/riou_params.hpp"
#include "riou/sim_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace riou::cli {

namespace {

bool write_file(const std::filesystem::path& path, const std::string& text, std::ostream& err)
{
    std::ofstream f(path, std::ios::binary);
    if (f) {
        f << text;
        f.close();
    }
    if (!f) {
        err << "error: cannot write " << path.string() << '\n';
        return false;
    }
    return true;
}

std::string gradient_text(const BoxGradient& g)
{
    std::ostringstream os;
    os << '(' << format_double(g[0]) << ", " << format_double(g[1]) << ", "
       << format_double(g[2]) << ", " << format_double(g[3]) << ')';
    return os.str();
}

std::string box_text(const Box2D& b)
{
    std::ostringstream os;
    os << '[' << format_double(b.x_min()) << ", " << format_double(b.y_min()) << ", "
       << format_double(b.x_max()) << ", " << format_double(b.y_max()) << ']';
    return os.str();
}

}  // namespace

int solve_params_cmd(double beta, std::ostream& out, std::ostream& err)
{
    RiouParams p;
    try {
        p = solve_params(beta);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
    const double res = max_abs_residual(p);
    const std::pair<const char*, double> rows[] = {
        {"beta", p.beta}, {"a", p.a}, {"b", p.b}, {"c", p.c},
        {"k", p.k},       {"t", p.t}, {"max|residual|", res},
    };
    for (const auto& [name, value] : rows) {
        out << std::left << std::setw(15) << name << std::right << std::setw(26)
            << format_double(value) << '\n';
    }
    out << "params";
    for (const auto& [name, value] : rows) {
        out << ' ' << (std::string_view(name) == "max|residual|" ? "max_residual" : name) << '='
            << format_double(value);
    }
    out << '\n';
    return kOk;
}

std::string curves_csv(const RiouParams& p, double step)
{
    if (!(step > 0.0 && step <= 0.1)) {
        throw DomainError("step must lie in (0, 0.1]");
    }
    // integral 1/step: exact i/n grid; otherwise i*step, closed with 1
    const double inv = 1.0 / step;
    const auto n = static_cast<long>(std::lround(inv));
    std::vector<double> grid;
    if (std::abs(inv - static_cast<double>(n)) < 1e-9 * inv) {
        for (long i = 0; i <= n; ++i) {
            grid.push_back(static_cast<double>(i) / static_cast<double>(n));
        }
    } else {
        for (long i = 0; static_cast<double>(i) * step < 1.0; ++i) {
            grid.push_back(static_cast<double>(i) * step);
        }
        grid.push_back(1.0);
    }

    std::string csv = "iou,loss_iou,grad_iou,loss_riou,grad_riou\n";
    for (double x : grid) {
        csv += format_double(x);
        csv += ',';
        csv += format_double(iou_loss(x));
        csv += ',';
        csv += format_double(iou_loss_grad_mag(x));
        csv += ',';
        csv += format_double(riou_loss(x, p));
        csv += ',';
        csv += format_double(riou_grad_mag(x, p));
        csv += '\n';
    }
    return csv;
}

int curves_cmd(const CurvesArgs& args, std::ostream& out, std::ostream& err)
{
    std::string csv;
    try {
        csv = curves_csv(solve_params(args.beta), args.step);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    if (args.out.empty()) {
        out << csv;
        return kOk;
    }
    return write_file(args.out, csv, err) ? kOk : kIoFailure;
}

int gradcheck_cmd(const GradcheckArgs& args, std::ostream& out, std::ostream& err,
                  const GradientFn& analytic)
{
    if (args.trials < 1) {
        err << "error: --trials must be at least 1\n";
        return kInputError;
    }
    LossKind rectified = LossKind::iou();
    try {
        rectified = LossKind::riou_beta(args.beta);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    const auto pairs = random_differentiable_pairs(args.trials, args.seed);
    bool all_ok = true;
    out << "trials " << args.trials << " seed " << args.seed << " h "
        << format_double(kGradcheckStep) << " tolerance " << format_double(kGradcheckTolerance)
        << '\n';
    for (const LossKind& kind : {LossKind::iou(), LossKind::giou(), LossKind::diou(), rectified}) {
        const GradcheckResult r = check_gradients(kind, pairs, kGradcheckStep, analytic);
        out << std::left << std::setw(6) << kind.name() << "max_rel_error "
            << format_double(r.max_rel_error) << (r.passed() ? "  ok" : "  FAILED") << '\n';
        if (!r.passed()) {
            all_ok = false;
            out << "  worst pred " << box_text(r.worst.pred) << " gt " << box_text(r.worst.gt)
                << '\n'
                << "  analytic " << gradient_text(r.worst_analytic) << '\n'
                << "  numeric  " << gradient_text(r.worst_numeric) << '\n';
        }
    }
    return all_ok ? kOk : kCheckFailed;
}

int simulate_cmd(const SimulateArgs& args, std::ostream& out, std::ostream& err)
{
    sim::SimReport report;
    try {
        const sim::SimConfig cfg = sim::load_config(args.config);
        report = sim::run_descent(cfg, {args.workers, args.budget});
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const BudgetExceeded& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    const std::filesystem::path hist = args.out_prefix + "_histograms.csv";
    const std::filesystem::path scal = args.out_prefix + "_scalars.csv";
    if (!write_file(hist, sim::histograms_csv(report), err) ||
        !write_file(scal, sim::scalars_csv(report), err)) {
        return kIoFailure;
    }
    out << sim::summary_text(report);
    out << "wrote " << hist.string() << " and " << scal.string() << '\n';
    return kOk;
}

int pyramid_cmd(const PyramidArgs& args, std::ostream& out, std::ostream& err)
{
    using namespace pyramid;
    LevelSpec levels;
    try {
        if (!args.levels.empty()) {
            std::ifstream f(args.levels);
            if (!f) {
                err << "error: cannot open levels file " << args.levels.string() << '\n';
                return kInputError;
            }
            levels = parse_levels(f);
        } else if (args.input_size == 320 || args.input_size == 512) {
            levels = default_levels(args.input_size);
        } else {
            err << "error: --input-size must be 320 or 512\n";
            return kInputError;
        }
        levels.check();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    TpnetOptions options;
    options.num_t_blocks = args.num_t_blocks;
    Tpnet net;
    try {
        net = build_tpnet(levels, options);
    } catch (const ShapeMismatch& e) {
        out << "validation: FAILED\n" << e.issue() << '\n';
        return kShapeMismatch;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    out << std::left << std::setw(5) << "id" << std::setw(16) << "label" << std::setw(10) << "op"
        << std::setw(9) << "stage" << std::setw(16) << "inputs" << "shape\n";
    for (const Node& n : net.graph.nodes()) {
        std::string inputs;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            inputs += (i ? "," : "") + std::to_string(n.inputs[i]);
        }
        out << std::setw(5) << n.id << std::setw(16) << n.label << std::setw(10) << to_string(n.op)
            << std::setw(9) << to_string(n.stage) << std::setw(16) << (inputs.empty() ? "-" : inputs)
            << n.shape << '\n';
    }
    out << std::right;
    const auto issues = validate(net.graph);
    if (!issues.empty()) {
        out << "validation: FAILED (" << issues.size() << " issue(s))\n";
        for (const ShapeIssue& i : issues) {
            out << "  " << i << '\n';
        }
        return kShapeMismatch;
    }
    out << "validation: ok (" << net.graph.size() << " nodes, " << net.blocks.size()
        << " T blocks)\n";

    if (!args.smoke) {
        return kOk;
    }
    TpnetOptions small = options;
    small.pyramid_channels = 8;
    std::string csv;
    try {
        const Tpnet tiny = build_tpnet(downscale_levels(levels), small);
        SmokeOptions so;
        so.seed = args.seed;
        so.inject_nan_at = args.inject_nan_at;
        const auto stats = forward_smoke(tiny.graph, so);
        csv = smoke_csv(tiny.graph, stats);
        out << "smoke: ok (" << stats.size() << " nodes, seed " << args.seed << ")\n";
    } catch (const NumericFailure& e) {
        out << "smoke: FAILED\n";
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    } catch (const ShapeMismatch& e) {
        out << "smoke: FAILED\n" << e.issue() << '\n';
        return kShapeMismatch;
    }
    if (args.smoke_out.empty()) {
        out << csv;
        return kOk;
    }
    return write_file(args.smoke_out, csv, err) ? kOk : kIoFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Rectified IoU loss laboratory", "riou"};
    app.require_subcommand(1);

    double beta = 0.95;
    auto* solve = app.add_subcommand("solve-params", "Solve the loss coefficients for a peak position");
    solve->add_option("--beta", beta, "Gradient peak position, in (0.5, 1)")->capture_default_str();

    CurvesArgs curves;
    std::string curves_out;
    auto* cur = app.add_subcommand("curves", "Write loss and gradient curves as CSV");
    cur->add_option("--beta", curves.beta, "Gradient peak position, in (0.5, 1)")->capture_default_str();
    cur->add_option("--step", curves.step, "IoU grid step, in (0, 0.1]")->capture_default_str();
    cur->add_option("--out", curves_out, "Output CSV path (default: standard output)");

    GradcheckArgs gc;
    auto* grad = app.add_subcommand("gradcheck", "Compare analytic box gradients with finite differences");
    grad->add_option("--trials", gc.trials, "Random configurations per loss")->capture_default_str();
    grad->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    grad->add_option("--beta", gc.beta, "Peak position of the rectified loss")->capture_default_str();

    SimulateArgs sa;
    std::string config;
    auto* simc = app.add_subcommand("simulate", "Run the box-regression simulator");
    simc->add_option("--config", config, "Config file (key = value)")->required();
    simc->add_option("--out-prefix", sa.out_prefix, "Prefix for the two CSV reports")->capture_default_str();
    simc->add_option("--workers", sa.workers, "Worker threads (0: hardware concurrency)")->capture_default_str();
    simc->add_option("--budget", sa.budget, "Maximum steps * samples")->capture_default_str();

    PyramidArgs pa;
    std::string levels_file;
    std::string smoke_out;
    auto* pyr = app.add_subcommand("pyramid", "Build and validate the feature pyramid graph");
    pyr->add_option("--input-size", pa.input_size, "Square input size: 320 or 512")->capture_default_str();
    pyr->add_option("--levels", levels_file, "Level table file, one 'channels height width' per line");
    pyr->add_option("--num-t-blocks", pa.num_t_blocks, "Number of chained T blocks")->capture_default_str();
    pyr->add_flag("--smoke", pa.smoke, "Also run a numeric forward pass on a down-scaled copy");
    pyr->add_option("--seed", pa.seed, "Seed for the smoke pass")->capture_default_str();
    pyr->add_option("--smoke-out", smoke_out, "Write the smoke CSV here instead of standard output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        err << "run 'riou --help' for usage\n";
        return kInputError;
    }

    if (solve->parsed()) {
        return solve_params_cmd(beta, out, err);
    }
    if (cur->parsed()) {
        curves.out = curves_out;
        return curves_cmd(curves, out, err);
    }
    if (grad->parsed()) {
        return gradcheck_cmd(gc, out, err);
    }
    if (simc->parsed()) {
        sa.config = config;
        return simulate_cmd(sa, out, err);
    }
    pa.levels = levels_file;
    pa.smoke_out = smoke_out;
    return pyramid_cmd(pa, out, err);
}

}  // namespace riou::cli
