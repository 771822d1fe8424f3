#pragma once

// Scenario configuration, orchestration and CSV/JSON export.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpt/master_equation.hpp"
#include "dpt/weak_noise.hpp"

namespace dpt {

inline constexpr const char* kVersion = "0.1.0";

enum class ModelKind { Full, Reduced, Asymptotic };
enum class InitialKind { Dark, Dicke, Coherent, Mixed };
enum class Method { Auto, Dp45, Extended };

struct InitialSpec {
    InitialKind kind = InitialKind::Dark;
    double m = 0.0;                      // Dicke: magnetic quantum number
    double phi = 0.0, theta = 0.0;       // Coherent
    std::vector<double> m_values;        // Mixed: diagonal mixture of Dicke states
    std::vector<double> weights;
};

struct ScenarioConfig {
    std::string name = "custom";
    ModelKind model = ModelKind::Reduced;
    bool asymptotic = false;             // also compute the N -> infinity rate

    ModelParams params;                  // n_atoms is taken from n_atoms_list
    std::vector<int> n_atoms_list;
    InitialSpec initial;

    double t_max = 8.0;
    int n_out = 161;

    Method method = Method::Auto;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    bool check_positivity = true;

    bool echo = true;
    bool conditioned = false;
    bool fock_rates = false;
    int fock_n_atoms = 0;                // 0: first entry of n_atoms_list
    std::optional<double> landscape_time;
    std::vector<double> cut_times;
    std::vector<double> cusp_mu;

    double asym_t_max = -1.0;            // < 0: same as t_max
    int asym_n_out = 0;                  // 0: same as n_out
    GridSpec grid;
    CutSpec cut;
    RateOptions rate;

    std::uint64_t seed = 1;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// INI text with [sections] and key = value; unknown sections or keys throw ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
// Throws ConfigError describing the first invalid field.
void validate_config(const ScenarioConfig& cfg);

std::vector<std::string> builtin_scenario_names();
std::string builtin_scenario_text(const std::string& name);  // throws ConfigError if unknown
ScenarioConfig builtin_scenario(const std::string& name);

// CSV: comma separated, 17 significant digits, LF endings, header first.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns);
    void row(const std::vector<double>& values);
    std::size_t rows() const { return rows_; }
    const std::string& text() const { return text_; }
    void save(const std::filesystem::path& path) const;

private:
    std::size_t ncols_;
    std::size_t rows_ = 0;
    std::string text_;
};
std::string format_double(double v);

struct RunOptions {
    std::filesystem::path out_dir = "out";
    int threads = 1;
    std::optional<std::uint64_t> seed;   // overrides the config seed
    bool quiet = true;
};

struct ScenarioResult {
    nlohmann::ordered_json summary;
    std::vector<std::filesystem::path> files;
};

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs all parts of the scenario, writes CSV files and summary.json into out_dir.
// On failure every file written so far is removed and ScenarioError carries the context.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt);

// Initial atomic state for a given N.
CMatrix initial_state(const InitialSpec& spec, int n_atoms);

}  // namespace dpt
