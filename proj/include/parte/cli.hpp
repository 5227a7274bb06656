#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "parte/colorfield.hpp"
#include "parte/optimize.hpp"
#include "parte/viewsphere.hpp"

namespace parte::cli {

/// Process exit codes. Failures also print {"error": ..., "exit_code": ...}
/// as one JSON line on stderr.
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,            ///< unknown flag or invalid argument value
    kMissingInput = 3,     ///< an input path does not exist
    kOracleUnreachable = 4,
    kBadInput = 5,         ///< input file failed to parse or validate
    kNumerical = 6,        ///< non-finite loss or gradient
    kOracleProtocol = 7,   ///< oracle answered with an error or malformed data
};

struct RunConfig {
    std::string subcommand;

    std::string mesh;
    std::string pred;
    std::string gt;
    std::string out;
    std::string out_dir;
    std::string labels_dir;
    std::string image;
    std::string mask;
    std::string score = "oracle";
    std::string checkpoint;
    std::string log;
    std::string config_file;
    std::string front_render;
    std::string pred_labels_dir;
    std::string gt_labels_dir;
    std::string pred_images_dir;
    std::string gt_images_dir;

    std::size_t views = kPaperViewCount;
    int resolution = kDefaultResolution;
    std::uint64_t seed = 0;
    bool cardinal = false;
    std::size_t samples = 100000;

    std::string oracle;
    std::string replay;
    std::string record;
    double timeout_s = 120.0;

    SdsConfig sds;
    ColorFieldConfig field;

    int threads = 1;
    bool deterministic = false;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Parses argv (without the program name). Returns nullopt when the
/// process should exit right away (help, usage error); `exit_code` then
/// holds the code and `out`/`err` have been written.
std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                                    int& exit_code);

/// Parse and execute. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace parte::cli
