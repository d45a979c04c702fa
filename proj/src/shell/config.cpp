#include "adb/shell/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adb/errors.hpp"

namespace adb::shell {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long parse_int(const std::string& value, long line_no) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (errno != 0 || end != value.c_str() + value.size() || value.empty())
        throw ParseError("expected integer, got '" + value + "' at line " +
                             std::to_string(line_no),
                         line_no);
    return v;
}

std::uint64_t parse_u64(const std::string& value, long line_no) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end != value.c_str() + value.size() || value.empty())
        throw ParseError("expected unsigned integer, got '" + value + "' at line " +
                             std::to_string(line_no),
                         line_no);
    return v;
}

double parse_real(const std::string& value, long line_no) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end != value.c_str() + value.size() || value.empty())
        throw ParseError("expected number, got '" + value + "' at line " +
                             std::to_string(line_no),
                         line_no);
    return v;
}

bool parse_bool(const std::string& value, long line_no) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParseError("expected boolean, got '" + value + "' at line " +
                         std::to_string(line_no),
                     line_no);
}

std::vector<int> parse_int_list(const std::string& value, long line_no) {
    std::vector<int> out;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(item, line_no)));
    }
    return out;
}

void apply_top_level(RunConfig& config, const std::string& key, const std::string& value,
                     long line_no) {
    if (key == "mode") {
        config.mode = sequencing::mode_from_string(value);
    } else if (key == "batch_size") {
        config.batch_size = static_cast<int>(parse_int(value, line_no));
    } else if (key == "permutations") {
        config.permutations = static_cast<int>(parse_int(value, line_no));
    } else if (key == "seed") {
        config.seed = parse_u64(value, line_no);
    } else if (key == "epsilon") {
        config.epsilon = parse_real(value, line_no);
    } else if (key == "q_low") {
        config.q_low = parse_real(value, line_no);
    } else if (key == "q_high") {
        config.q_high = parse_real(value, line_no);
    } else if (key == "subsample_cap") {
        config.subsample_cap = static_cast<int>(parse_int(value, line_no));
    } else if (key == "max_iterations") {
        config.max_iterations = static_cast<int>(parse_int(value, line_no));
    } else if (key == "output_dir") {
        config.output_dir = value;
    } else {
        throw ParseError("unknown key '" + key + "' at line " + std::to_string(line_no),
                         line_no);
    }
}

void apply_experiment(RunConfig& config, const std::string& key, const std::string& value,
                      long line_no) {
    harness::ExperimentConfig& exp = config.experiment;
    if (key == "n_train") {
        exp.synthetic.n_train = static_cast<int>(parse_int(value, line_no));
    } else if (key == "n_val") {
        exp.synthetic.n_val = static_cast<int>(parse_int(value, line_no));
    } else if (key == "n_ood") {
        exp.synthetic.n_ood = static_cast<int>(parse_int(value, line_no));
    } else if (key == "dimension") {
        exp.synthetic.dimension = static_cast<int>(parse_int(value, line_no));
    } else if (key == "label_shift") {
        exp.synthetic.label_shift = parse_real(value, line_no);
    } else if (key == "shift_direction") {
        exp.synthetic.shift_direction = static_cast<int>(parse_int(value, line_no));
    } else if (key == "noise_sd") {
        exp.synthetic.noise_sd = parse_real(value, line_no);
    } else if (key == "skew") {
        exp.synthetic.skew = parse_real(value, line_no);
    } else if (key == "curvature") {
        exp.synthetic.curvature = parse_real(value, line_no);
    } else if (key == "seed") {
        exp.synthetic.seed = parse_u64(value, line_no);
    } else if (key == "model") {
        if (value == "linear") {
            exp.model.kind = harness::ModelKind::kLinear;
        } else if (value == "mlp") {
            exp.model.kind = harness::ModelKind::kMlp;
            if (exp.model.hidden_widths.empty()) exp.model.hidden_widths = {16};
        } else {
            throw ParseError("unknown model '" + value + "' at line " +
                                 std::to_string(line_no),
                             line_no);
        }
    } else if (key == "hidden") {
        exp.model.hidden_widths = parse_int_list(value, line_no);
    } else if (key == "learning_rate") {
        exp.train.learning_rate = parse_real(value, line_no);
    } else if (key == "epochs") {
        exp.train.epochs = static_cast<int>(parse_int(value, line_no));
    } else if (key == "models_per_group") {
        exp.models_per_group = static_cast<int>(parse_int(value, line_no));
    } else if (key == "sample_size") {
        exp.sample_size = static_cast<int>(parse_int(value, line_no));
    } else if (key == "folds") {
        exp.cv_folds = static_cast<int>(parse_int(value, line_no));
    } else if (key == "sample_without_replacement") {
        exp.sample_without_replacement = parse_bool(value, line_no);
    } else if (key == "enforce_shift_gate") {
        exp.enforce_shift_gate = parse_bool(value, line_no);
    } else {
        throw ParseError("unknown key '" + key + "' in [experiment] at line " +
                             std::to_string(line_no),
                         line_no);
    }
}

void validate(const RunConfig& config) {
    auto fail = [](const std::string& what) { throw InputError("config: " + what); };
    if (config.batch_size < 0) fail("batch_size must be >= 0");
    if (config.permutations < 1) fail("permutations must be >= 1");
    if (!(config.epsilon > 0.0)) fail("epsilon must be positive");
    if (!(config.q_low > 0.0 && config.q_low < 1.0)) fail("q_low must be in (0,1)");
    if (!(config.q_high > 0.0 && config.q_high < 1.0)) fail("q_high must be in (0,1)");
    if (!(config.q_low < config.q_high)) fail("q_low must be < q_high");
    if (config.subsample_cap < 0) fail("subsample_cap must be >= 0");
    if (config.max_iterations < 1) fail("max_iterations must be >= 1");
    if (config.output_dir.empty()) fail("output_dir must be nonempty");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::stringstream stream(text);
    std::string line;
    long line_no = 0;
    bool in_experiment = false;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line == "[experiment]") {
                in_experiment = true;
                continue;
            }
            throw ParseError("unknown section '" + line + "' at line " +
                                 std::to_string(line_no),
                             line_no);
        }
        const auto equals = line.find('=');
        if (equals == std::string::npos)
            throw ParseError("expected 'key = value' at line " + std::to_string(line_no),
                             line_no);
        const std::string key = trim(line.substr(0, equals));
        const std::string value = trim(line.substr(equals + 1));
        if (key.empty())
            throw ParseError("empty key at line " + std::to_string(line_no), line_no);
        if (in_experiment) {
            apply_experiment(config, key, value, line_no);
        } else {
            apply_top_level(config, key, value, line_no);
        }
    }

    // Keep the experiment stage consistent with the pipeline stage.
    config.experiment.mode = config.mode;
    config.experiment.q_low = config.q_low;
    config.experiment.q_high = config.q_high;
    config.experiment.epsilon = config.epsilon;
    config.experiment.max_iterations = config.max_iterations;
    config.experiment.permutations = config.permutations;
    config.experiment.train.batch_size = config.batch_size;
    if (config.subsample_cap > 0) {
        config.experiment.subsample_cap = config.subsample_cap;
    } else {
        config.experiment.subsample_cap.reset();
    }
    validate(config);
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream input(path);
    if (!input) throw ParseError("cannot open '" + path + "'", 0);
    std::stringstream buffer;
    buffer << input.rdbuf();
    return parse_config(buffer.str());
}

std::string config_to_string(const RunConfig& config) {
    std::ostringstream out;
    out << "mode = " << sequencing::to_string(config.mode) << "\n";
    out << "batch_size = " << config.batch_size << "\n";
    out << "permutations = " << config.permutations << "\n";
    out << "seed = " << config.seed << "\n";
    out << "epsilon = " << config.epsilon << "\n";
    out << "q_low = " << config.q_low << "\n";
    out << "q_high = " << config.q_high << "\n";
    out << "subsample_cap = " << config.subsample_cap << "\n";
    out << "max_iterations = " << config.max_iterations << "\n";
    out << "output_dir = " << config.output_dir << "\n";
    out << "\n[experiment]\n";
    const harness::ExperimentConfig& exp = config.experiment;
    out << "n_train = " << exp.synthetic.n_train << "\n";
    out << "n_val = " << exp.synthetic.n_val << "\n";
    out << "n_ood = " << exp.synthetic.n_ood << "\n";
    out << "dimension = " << exp.synthetic.dimension << "\n";
    out << "label_shift = " << exp.synthetic.label_shift << "\n";
    out << "shift_direction = " << exp.synthetic.shift_direction << "\n";
    out << "noise_sd = " << exp.synthetic.noise_sd << "\n";
    out << "skew = " << exp.synthetic.skew << "\n";
    out << "curvature = " << exp.synthetic.curvature << "\n";
    out << "seed = " << exp.synthetic.seed << "\n";
    out << "model = " << (exp.model.kind == harness::ModelKind::kLinear ? "linear" : "mlp")
        << "\n";
    if (!exp.model.hidden_widths.empty()) {
        out << "hidden = ";
        for (std::size_t i = 0; i < exp.model.hidden_widths.size(); ++i)
            out << (i ? "," : "") << exp.model.hidden_widths[i];
        out << "\n";
    }
    out << "learning_rate = " << exp.train.learning_rate << "\n";
    out << "epochs = " << exp.train.epochs << "\n";
    out << "models_per_group = " << exp.models_per_group << "\n";
    out << "sample_size = " << exp.sample_size << "\n";
    out << "folds = " << exp.cv_folds << "\n";
    out << "sample_without_replacement = "
        << (exp.sample_without_replacement ? "true" : "false") << "\n";
    out << "enforce_shift_gate = " << (exp.enforce_shift_gate ? "true" : "false") << "\n";
    return out.str();
}

}  // namespace adb::shell
