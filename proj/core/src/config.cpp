#include "transience/config.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "transience/textio.hpp"

namespace transience {

namespace {

struct ConfigEntry {
    std::string description;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

long long parse_ll(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("config key " + key + ": expected an integer, got '" + value + "'");
    }
    return out;
}

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double out = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config key " + key + ": expected true/false, got '" + value + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string list_str(const std::vector<int>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << v[i];
    }
    return out.str();
}

// the schema: key -> (description, getter, setter); ordered for help output
const std::vector<std::pair<std::string, ConfigEntry>>& schema() {
    static const std::vector<std::pair<std::string, ConfigEntry>> entries = [] {
        std::vector<std::pair<std::string, ConfigEntry>> s;
        auto add_str = [&s](const std::string& key, std::string RunConfig::* field,
                            const std::string& desc) {
            s.push_back({key, {desc, [field](const RunConfig& c) { return c.*field; },
                               [field](RunConfig& c, const std::string& v) { c.*field = v; }}});
        };
        auto add_int = [&s](const std::string& key, int RunConfig::* field, const std::string& desc) {
            s.push_back({key, {desc,
                               [field](const RunConfig& c) { return std::to_string(c.*field); },
                               [field, key](RunConfig& c, const std::string& v) {
                                   c.*field = static_cast<int>(parse_ll(key, v));
                               }}});
        };
        auto add_num = [&s](const std::string& key, double RunConfig::* field, const std::string& desc) {
            s.push_back({key, {desc,
                               [field](const RunConfig& c) { return format_double(c.*field); },
                               [field, key](RunConfig& c, const std::string& v) {
                                   c.*field = parse_num(key, v);
                               }}});
        };
        auto add_bool = [&s](const std::string& key, bool RunConfig::* field, const std::string& desc) {
            s.push_back({key, {desc, [field](const RunConfig& c) { return bool_str(c.*field); },
                               [field, key](RunConfig& c, const std::string& v) {
                                   c.*field = parse_bool(key, v);
                               }}});
        };
        auto add_list = [&s](const std::string& key, std::vector<int> RunConfig::* field,
                             const std::string& desc) {
            s.push_back({key, {desc, [field](const RunConfig& c) { return list_str(c.*field); },
                               [field](RunConfig& c, const std::string& v) {
                                   c.*field = parse_int_list(v);
                               }}});
        };

        add_str("variant", &RunConfig::variant,
                "alignment method: contrastive | cca | mmi | ctw | uniform");
        add_num("margin", &RunConfig::margin, "contrastive margin m");
        add_num("lambda", &RunConfig::lambda, "reconstruction loss weight");
        add_num("kappa", &RunConfig::kappa, "KL loss weight for private variables");
        add_num("cca_reg", &RunConfig::cca_reg, "diagonal regularizer for batch covariances");
        add_str("mmi_mode", &RunConfig::mmi_mode,
                "mutual-information estimator form: sample_mean | literal");
        add_bool("use_autoencoder", &RunConfig::use_autoencoder,
                 "add the reconstruction loss and decoder networks");
        add_bool("use_private", &RunConfig::use_private,
                 "add per-view private latents with a KL prior");
        add_num("sigma_noise", &RunConfig::sigma_noise,
                "denoising corruption std on reconstruction inputs");
        add_num("kde_sigma_init", &RunConfig::kde_sigma_init, "initial KDE bandwidths");
        add_list("hidden", &RunConfig::hidden, "encoder/decoder hidden layer sizes");
        add_num("leak", &RunConfig::leak, "leaky-ReLU negative slope");
        add_int("d_z", &RunConfig::d_z, "shared latent dimension");
        add_int("d_z_tilde", &RunConfig::d_z_tilde, "private latent dimension");
        add_num("lr", &RunConfig::lr, "Adam learning rate");
        add_num("beta1", &RunConfig::beta1, "Adam first-moment decay");
        add_num("beta2", &RunConfig::beta2, "Adam second-moment decay");
        add_num("adam_eps", &RunConfig::adam_eps, "Adam denominator epsilon");
        add_int("batch_size", &RunConfig::batch_size, "minibatch size for phase-1 training");
        add_int("epochs_per_phase", &RunConfig::epochs_per_phase,
                "epochs over the aligned pool per outer iteration");
        add_int("max_outer_iters", &RunConfig::max_outer_iters,
                "cap on train/DTW alternations");
        add_num("convergence_threshold", &RunConfig::convergence_threshold,
                "stop when the changed-path-cell fraction drops below this");
        add_str("dtw_metric", &RunConfig::dtw_metric, "frame distance: cosine | euclidean");
        add_num("ctw_reg", &RunConfig::ctw_reg, "covariance regularizer for the linear baseline");
        add_int("d_x", &RunConfig::d_x, "first-view feature dimension (synthetic)");
        add_int("d_y", &RunConfig::d_y, "second-view feature dimension (synthetic)");
        add_int("latent_dim", &RunConfig::latent_dim, "shared trajectory dimension (synthetic)");
        add_int("t_x", &RunConfig::t_x, "first-view length (synthetic)");
        add_int("t_y", &RunConfig::t_y, "second-view length (synthetic)");
        add_num("noise_std", &RunConfig::noise_std, "observation noise std (synthetic)");
        add_num("warp_jitter", &RunConfig::warp_jitter, "warp increment jitter in [0,1)");
        add_num("smoothness", &RunConfig::smoothness, "latent smoothing window std, frames");
        add_int("n_train_pairs", &RunConfig::n_train_pairs, "pairs used for alignment training");
        add_int("n_test_pairs", &RunConfig::n_test_pairs, "held-out pairs for downstream MSE");
        add_bool("deltas", &RunConfig::deltas, "append delta and acceleration features");
        add_int("context_width", &RunConfig::context_width,
                "context window width (odd; 1 disables windows and PCA)");
        add_int("pca_retained", &RunConfig::pca_retained,
                "PCA components kept after context windows (project default, not an"
                " externally fixed value)");
        add_list("ds_hidden", &RunConfig::ds_hidden, "downstream regressor hidden sizes");
        add_num("ds_lr", &RunConfig::ds_lr, "downstream regressor learning rate");
        add_int("ds_epochs", &RunConfig::ds_epochs, "downstream regressor epochs");
        add_int("ds_batch_size", &RunConfig::ds_batch_size, "downstream regressor batch size");
        s.push_back({"seed", {"master seed; all randomness derives from it",
                              [](const RunConfig& c) { return std::to_string(c.seed); },
                              [](RunConfig& c, const std::string& v) {
                                  c.seed = static_cast<std::uint64_t>(parse_ll("seed", v));
                              }}});
        add_str("out_dir", &RunConfig::out_dir, "output directory (created if missing)");
        add_str("data_dir", &RunConfig::data_dir, "input directory for `train`");
        add_str("variants", &RunConfig::variants, "comma list of variants for `eval`");
        add_int("n_seeds", &RunConfig::n_seeds, "`eval` runs seeds seed..seed+n_seeds-1");
        return s;
    }();
    return entries;
}

const ConfigEntry* find_entry(const std::string& key) {
    for (const auto& [name, entry] : schema()) {
        if (name == key) return &entry;
    }
    return nullptr;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_ll("list", item)));
    }
    if (out.empty()) {
        throw std::invalid_argument("expected a comma-separated integer list, got '" + csv + "'");
    }
    return out;
}

std::vector<Variant> parse_variants(const std::string& csv) {
    std::vector<Variant> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.push_back(variant_from_string(item));
    }
    if (out.empty()) {
        throw std::invalid_argument("config key variants: empty list");
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("expected key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    const ConfigEntry* entry = find_entry(key);
    if (!entry) {
        throw std::invalid_argument("unknown config key: " + key);
    }
    entry->set(cfg, value);
}

RunConfig load_config(const std::filesystem::path& file, RunConfig base) {
    std::ifstream in(file);
    if (!in) {
        throw std::invalid_argument("load_config: cannot open " + file.string());
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        try {
            apply_override(base, line.substr(first, last - first + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

void validate(const RunConfig& cfg) {
    variant_from_string(cfg.variant);
    (void)to_loss_config(cfg);
    (void)to_train_config(cfg);
    (void)to_synth_spec(cfg);
    if (cfg.context_width < 1 || cfg.context_width % 2 == 0) {
        throw std::invalid_argument("config key context_width: must be odd and positive");
    }
    if (cfg.pca_retained < 1) {
        throw std::invalid_argument("config key pca_retained: must be positive");
    }
    if (cfg.n_train_pairs < 1) {
        throw std::invalid_argument("config key n_train_pairs: must be positive");
    }
    if (cfg.n_test_pairs < 1) {
        throw std::invalid_argument("config key n_test_pairs: must be positive");
    }
    if (cfg.n_seeds < 1) {
        throw std::invalid_argument("config key n_seeds: must be positive");
    }
    if (cfg.ds_epochs < 1 || cfg.ds_batch_size < 2) {
        throw std::invalid_argument("config keys ds_epochs/ds_batch_size: must be positive (batch >= 2)");
    }
    parse_variants(cfg.variants);
}

std::string config_help() {
    std::ostringstream out;
    RunConfig defaults;
    out << "Config keys (key=value file or --set key=value):\n";
    for (const auto& [name, entry] : schema()) {
        out << "  " << name << " = " << entry.get(defaults) << "\n      " << entry.description
            << "\n";
    }
    return out.str();
}

std::string serialize(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& [name, entry] : schema()) {
        out << name << "=" << entry.get(cfg) << "\n";
    }
    return out.str();
}

LossConfig to_loss_config(const RunConfig& cfg) {
    LossConfig loss;
    const std::string v = cfg.variant;
    if (v == "cca" || v == "mmi" || v == "contrastive") {
        loss.dependence = dependence_from_string(v);
    }
    loss.margin = cfg.margin;
    loss.lambda = cfg.lambda;
    loss.kappa = cfg.kappa;
    loss.cca_regularizer = cfg.cca_reg;
    loss.mmi_mode = mmi_mode_from_string(cfg.mmi_mode);
    loss.use_autoencoder = cfg.use_autoencoder;
    loss.use_private = cfg.use_private;
    loss.sigma_noise = cfg.sigma_noise;
    validate(loss);
    return loss;
}

TrainConfig to_train_config(const RunConfig& cfg) {
    TrainConfig train;
    train.hidden = cfg.hidden;
    train.leak = cfg.leak;
    train.d_z = cfg.d_z;
    train.d_z_tilde = cfg.d_z_tilde;
    train.adam.lr = cfg.lr;
    train.adam.beta1 = cfg.beta1;
    train.adam.beta2 = cfg.beta2;
    train.adam.eps = cfg.adam_eps;
    train.batch_size = cfg.batch_size;
    train.epochs_per_phase = cfg.epochs_per_phase;
    train.max_outer_iterations = cfg.max_outer_iters;
    train.convergence_threshold = cfg.convergence_threshold;
    train.metric = dtw_metric_from_string(cfg.dtw_metric);
    train.ctw_regularizer = cfg.ctw_reg;
    train.kde_sigma_init = cfg.kde_sigma_init;
    train.seed = cfg.seed;
    validate(train);
    return train;
}

SynthSpec to_synth_spec(const RunConfig& cfg) {
    SynthSpec spec;
    spec.d_x = cfg.d_x;
    spec.d_y = cfg.d_y;
    spec.latent_dim = cfg.latent_dim;
    spec.t_x = cfg.t_x;
    spec.t_y = cfg.t_y;
    spec.noise_std = cfg.noise_std;
    spec.warp_jitter = cfg.warp_jitter;
    spec.smoothness = cfg.smoothness;
    validate(spec);
    return spec;
}

PreprocessConfig to_preprocess_config(const RunConfig& cfg) {
    PreprocessConfig pre;
    pre.deltas = cfg.deltas;
    pre.context_width = cfg.context_width;
    pre.pca_retained = cfg.pca_retained;
    return pre;
}

DownstreamConfig to_downstream_config(const RunConfig& cfg) {
    DownstreamConfig ds;
    ds.hidden = cfg.ds_hidden;
    ds.leak = cfg.leak;
    ds.lr = cfg.ds_lr;
    ds.epochs = cfg.ds_epochs;
    ds.batch_size = cfg.ds_batch_size;
    ds.seed = cfg.seed;
    return ds;
}

BenchmarkSpec to_benchmark_spec(const RunConfig& cfg) {
    BenchmarkSpec spec;
    spec.synth = to_synth_spec(cfg);
    spec.n_train_pairs = cfg.n_train_pairs;
    spec.n_test_pairs = cfg.n_test_pairs;
    spec.preprocess = to_preprocess_config(cfg);
    spec.loss = to_loss_config(cfg);
    spec.train = to_train_config(cfg);
    spec.downstream = to_downstream_config(cfg);
    return spec;
}

}  // namespace transience
