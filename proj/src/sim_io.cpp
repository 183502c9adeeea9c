#include "riou/sim_io.hpp"

#include "riou/errors.hpp"
#include "riou/format.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string_view>
#include <vector>

namespace riou::sim {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(int line, const std::string& what)
{
    std::ostringstream msg;
    msg << "config line " << line << ": " << what;
    throw ConfigError(msg.str());
}

template <typename T>
T parse_number(std::string_view text, int line, std::string_view key)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        fail(line, "cannot parse '" + std::string(text) + "' as a value for " + std::string(key));
    }
    return value;
}

std::vector<IouBucket> parse_distribution(std::string_view text, int line)
{
    std::vector<IouBucket> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view item = trim(text.substr(0, comma));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) {
            fail(line, "iou_distribution entries must be lower:weight pairs");
        }
        out.push_back({parse_number<double>(trim(item.substr(0, colon)), line, "iou_distribution"),
                       parse_number<double>(trim(item.substr(colon + 1)), line,
                                            "iou_distribution")});
    }
    return out;
}

std::string distribution_text(const std::vector<IouBucket>& buckets)
{
    std::string out;
    for (const IouBucket& b : buckets) {
        if (!out.empty()) {
            out += ", ";
        }
        out += format_double(b.lower) + ":" + format_double(b.weight);
    }
    return out;
}

}  // namespace

SimConfig parse_config(std::istream& in)
{
    SimConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            fail(line, "expected key = value");
        }
        const std::string key(trim(text.substr(0, eq)));
        const std::string_view value = trim(text.substr(eq + 1));
        if (!seen.insert(key).second) {
            fail(line, "duplicate key '" + key + "'");
        }

        if (key == "sample_count") {
            cfg.sample_count = parse_number<std::size_t>(value, line, key);
        } else if (key == "iou_distribution") {
            cfg.iou_distribution = parse_distribution(value, line);
        } else if (key == "perturb_mode") {
            const auto mode = parse_perturb_mode(value);
            if (!mode) {
                fail(line, "perturb_mode must be shift or scale");
            }
            cfg.perturb_mode = *mode;
        } else if (key == "steps") {
            cfg.steps = parse_number<int>(value, line, key);
        } else if (key == "learning_rate") {
            cfg.learning_rate = parse_number<double>(value, line, key);
        } else if (key == "loss_kind") {
            const auto type = parse_loss_type(value);
            if (!type) {
                fail(line, "loss_kind must be one of iou, giou, diou, riou");
            }
            cfg.loss_kind = *type;
        } else if (key == "beta") {
            cfg.beta = parse_number<double>(value, line, key);
        } else if (key == "seed") {
            cfg.seed = parse_number<std::uint64_t>(value, line, key);
        } else {
            fail(line, "unknown key '" + key + "'");
        }
    }
    validate(cfg);
    return cfg;
}

SimConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    return parse_config(in);
}

std::string format_config(const SimConfig& cfg)
{
    std::ostringstream out;
    out << "sample_count = " << cfg.sample_count << '\n'
        << "iou_distribution = " << distribution_text(cfg.iou_distribution) << '\n'
        << "perturb_mode = " << to_string(cfg.perturb_mode) << '\n'
        << "steps = " << cfg.steps << '\n'
        << "learning_rate = " << format_double(cfg.learning_rate) << '\n'
        << "loss_kind = " << to_string(cfg.loss_kind) << '\n'
        << "beta = " << format_double(cfg.beta) << '\n'
        << "seed = " << cfg.seed << '\n';
    return out.str();
}

std::string histograms_csv(const SimReport& report)
{
    std::ostringstream out;
    out << "bin_lower,bin_upper,initial_count,final_count,initial_grad_share\n";
    for (std::size_t i = 0; i < kHistogramBins; ++i) {
        out << format_double(static_cast<double>(i) / kHistogramBins) << ','
            << format_double(static_cast<double>(i + 1) / kHistogramBins) << ','
            << report.initial_histogram[i] << ',' << report.final_histogram[i] << ','
            << format_double(report.initial_grad_share[i]) << '\n';
    }
    return out.str();
}

std::string scalars_csv(const SimReport& report)
{
    const SimConfig& c = report.config;
    std::ostringstream out;
    out << "key,value\n"
        << "sample_count," << c.sample_count << '\n'
        << "iou_distribution,\"" << distribution_text(c.iou_distribution) << "\"\n"
        << "perturb_mode," << to_string(c.perturb_mode) << '\n'
        << "steps," << c.steps << '\n'
        << "learning_rate," << format_double(c.learning_rate) << '\n'
        << "loss_kind," << to_string(c.loss_kind) << '\n'
        << "beta," << format_double(c.beta) << '\n'
        << "seed," << c.seed << '\n'
        << "steps_executed," << report.steps_executed << '\n'
        << "mean_initial_iou," << format_double(report.mean_initial_iou) << '\n'
        << "mean_final_iou," << format_double(report.mean_final_iou) << '\n'
        << "frac_final_iou_ge_0.7," << format_double(report.frac_final_ge_07) << '\n'
        << "frac_final_iou_ge_0.8," << format_double(report.frac_final_ge_08) << '\n'
        << "frac_final_iou_ge_0.9," << format_double(report.frac_final_ge_09) << '\n';
    return out.str();
}

std::string summary_text(const SimReport& report)
{
    const SimConfig& c = report.config;
    std::ostringstream out;
    out << "# box-regression simulation\n"
        << "# each anchor is regressed independently (no shared model); the IoU profile\n"
        << "# below is a configured, illustrative distribution\n"
        << "loss            " << to_string(c.loss_kind);
    if (c.loss_kind == LossType::Riou) {
        out << " (beta " << format_double(c.beta) << ')';
    }
    out << '\n'
        << "samples         " << c.sample_count << " (" << to_string(c.perturb_mode)
        << " perturbation, seed " << c.seed << ")\n"
        << "profile         " << distribution_text(c.iou_distribution) << '\n'
        << "descent         " << report.steps_executed << " steps, lr "
        << format_double(c.learning_rate) << '\n'
        << std::fixed << std::setprecision(4)
        << "mean IoU        " << report.mean_initial_iou << " -> " << report.mean_final_iou
        << '\n'
        << "final IoU>=0.7  " << report.frac_final_ge_07 << '\n'
        << "final IoU>=0.8  " << report.frac_final_ge_08 << '\n'
        << "final IoU>=0.9  " << report.frac_final_ge_09 << '\n'
        << "\nbin        initial    final  grad-share\n";
    for (std::size_t i = 0; i < kHistogramBins; ++i) {
        out << std::setprecision(1) << static_cast<double>(i) / kHistogramBins << '-'
            << static_cast<double>(i + 1) / kHistogramBins << "  " << std::setw(9)
            << report.initial_histogram[i] << ' ' << std::setw(8) << report.final_histogram[i]
            << "  " << std::setprecision(4) << std::setw(10) << report.initial_grad_share[i]
            << '\n';
    }
    return out.str();
}

}  // namespace riou::sim
