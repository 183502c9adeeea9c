#pragma once

// Command handlers behind the `riou` executable. Each returns the process
// exit code and writes only to the streams it is given.

#include "riou/gradcheck.hpp"
#include "riou/pyramid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace riou::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kShapeMismatch = 3,
    kIoFailure = 4,
    kCheckFailed = 5,
};

int solve_params_cmd(double beta, std::ostream& out, std::ostream& err);

/// `iou,loss_iou,grad_iou,loss_riou,grad_riou` from 0 to 1 inclusive.
/// Throws DomainError unless 0 < step <= 0.1.
std::string curves_csv(const RiouParams& p, double step);

struct CurvesArgs {
    double beta = 0.95;
    double step = 0.001;
    std::filesystem::path out;  // empty: standard output
};
int curves_cmd(const CurvesArgs& args, std::ostream& out, std::ostream& err);

struct GradcheckArgs {
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    double beta = 0.95;
};
int gradcheck_cmd(const GradcheckArgs& args, std::ostream& out, std::ostream& err,
                  const GradientFn& analytic = loss_gradient_boxes);

struct SimulateArgs {
    std::filesystem::path config;
    std::string out_prefix = "simulation";
    unsigned workers = 0;
    std::uint64_t budget = 100'000'000;
};
int simulate_cmd(const SimulateArgs& args, std::ostream& out, std::ostream& err);

struct PyramidArgs {
    int input_size = 320;
    std::filesystem::path levels;  // empty: built-in table for input_size
    int num_t_blocks = 5;
    bool smoke = false;
    std::uint64_t seed = 0;
    std::filesystem::path smoke_out;  // empty: append the CSV to standard output
    std::optional<pyramid::NodeId> inject_nan_at;  // test hook
};
int pyramid_cmd(const PyramidArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace riou::cli
