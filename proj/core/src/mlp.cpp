#include "transience/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "transience/errors.hpp"
#include "transience/textio.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace transience {

Mlp make_mlp(int in, const std::vector<int>& hidden, int out, double leak, Rng& rng) {
    if (in < 1 || out < 1) {
        throw std::invalid_argument("make_mlp: dims must be positive");
    }
    std::vector<int> dims;
    dims.push_back(in);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("make_mlp: hidden sizes must be positive");
        dims.push_back(h);
    }
    dims.push_back(out);

    Mlp net;
    net.leak = leak;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int fan_in = dims[i];
        const int fan_out = dims[i + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        MlpLayer layer;
        layer.weights.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.weights(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
            }
        }
        layer.bias = Eigen::VectorXd::Zero(fan_out);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
    if (net.layers.empty()) {
        throw std::invalid_argument("forward: empty network");
    }
    if (x.rows() != net.input_dim()) {
        throw std::invalid_argument("forward: input dim mismatch");
    }
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
    }
    Eigen::MatrixXd a = x;
    const std::size_t last = net.layers.size() - 1;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (cache) cache->inputs.push_back(a);
        Eigen::MatrixXd z = (net.layers[i].weights * a).colwise() + net.layers[i].bias;
        if (cache) cache->preacts.push_back(z);
        if (i < last) {
            a = z.unaryExpr([leak = net.leak](double v) { return v > 0.0 ? v : leak * v; });
        } else {
            a = std::move(z);
        }
    }
    return a;
}

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads g;
    for (const auto& layer : net.layers) {
        g.layers.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                            Eigen::VectorXd::Zero(layer.bias.size())});
    }
    return g;
}

Eigen::MatrixXd backward(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_output, MlpGrads& accum) {
    const std::size_t n_layers = net.layers.size();
    if (cache.inputs.size() != n_layers || cache.preacts.size() != n_layers ||
        accum.layers.size() != n_layers) {
        throw std::invalid_argument("backward: cache/grads do not match the network");
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        if (cache.inputs[i].rows() != net.layers[i].weights.cols() ||
            cache.preacts[i].rows() != net.layers[i].weights.rows()) {
            throw std::invalid_argument("backward: cache shape mismatch (stale cache?)");
        }
    }
    if (grad_output.rows() != net.output_dim() || grad_output.cols() != cache.inputs[0].cols()) {
        throw std::invalid_argument("backward: grad_output shape mismatch");
    }

    Eigen::MatrixXd delta = grad_output;  // gradient wrt the affine output
    for (std::size_t idx = n_layers; idx-- > 0;) {
        if (idx < n_layers - 1) {
            // back through leaky-ReLU of this layer's pre-activation
            delta = delta.cwiseProduct(cache.preacts[idx].unaryExpr(
                [leak = net.leak](double v) { return v > 0.0 ? 1.0 : leak; }));
        }
        accum.layers[idx].weights += delta * cache.inputs[idx].transpose();
        accum.layers[idx].bias += delta.rowwise().sum();
        if (idx > 0) {
            delta = net.layers[idx].weights.transpose() * delta;
        } else {
            return net.layers[0].weights.transpose() * delta;
        }
    }
    return {};
}

AdamState make_adam_state(const Mlp& net, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    st.m = zero_grads(net).layers;
    st.v = zero_grads(net).layers;
    return st;
}

namespace {

template <typename Param, typename Grad, typename Moment>
void adam_update(Param& p, const Grad& g, Moment& m, Moment& v,
                 long step, const AdamConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    p.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state) {
    if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    for (const auto& layer : grads.layers) {
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
            throw NumericalError("adam_step: nonfinite gradient, update rejected");
        }
    }
    state.step += 1;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        adam_update(net.layers[i].weights, grads.layers[i].weights,
                    state.m[i].weights, state.v[i].weights, state.step, state.cfg);
        adam_update(net.layers[i].bias, grads.layers[i].bias,
                    state.m[i].bias, state.v[i].bias, state.step, state.cfg);
    }
}

AdamVecState make_adam_state(const Eigen::VectorXd& params, AdamConfig cfg) {
    AdamVecState st;
    st.cfg = cfg;
    st.m = Eigen::VectorXd::Zero(params.size());
    st.v = Eigen::VectorXd::Zero(params.size());
    return st;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamVecState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    if (!grads.allFinite()) {
        throw NumericalError("adam_step: nonfinite gradient, update rejected");
    }
    state.step += 1;
    const auto& cfg = state.cfg;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
    state.v = (cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grads.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    params.array() -= cfg.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.eps);
}

Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& x, double sigma, Rng& rng) {
    if (sigma < 0.0) {
        throw std::invalid_argument("inject_noise: sigma must be nonnegative");
    }
    if (sigma == 0.0) return x;
    Eigen::MatrixXd out = x;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            out(r, c) += sigma * gaussian(rng);
        }
    }
    return out;
}

EncoderStack make_encoder_stack(const StackSpec& spec, Rng& rng) {
    if (spec.d_x < 1 || spec.d_y < 1 || spec.d_z < 1) {
        throw std::invalid_argument("make_encoder_stack: dims must be positive");
    }
    if (spec.use_private && spec.d_z_tilde < 1) {
        throw std::invalid_argument("make_encoder_stack: d_z_tilde must be positive with private variables");
    }
    EncoderStack stack;
    stack.use_autoencoder = spec.use_autoencoder;
    stack.use_private = spec.use_private;
    stack.d_z = spec.d_z;
    stack.d_z_tilde = spec.use_private ? spec.d_z_tilde : 0;
    stack.encoder_x = make_mlp(spec.d_x, spec.hidden, spec.d_z, spec.leak, rng);
    stack.encoder_y = make_mlp(spec.d_y, spec.hidden, spec.d_z, spec.leak, rng);
    if (spec.use_private) {
        stack.private_x = make_mlp(spec.d_x, spec.hidden, spec.d_z_tilde, spec.leak, rng);
        stack.private_y = make_mlp(spec.d_y, spec.hidden, spec.d_z_tilde, spec.leak, rng);
    }
    if (spec.use_autoencoder) {
        const int dec_in = spec.d_z + stack.d_z_tilde;
        stack.decoder_x = make_mlp(dec_in, spec.hidden, spec.d_x, spec.leak, rng);
        stack.decoder_y = make_mlp(dec_in, spec.hidden, spec.d_y, spec.leak, rng);
    }
    return stack;
}

namespace {

void write_net_header(std::ostream& out, const std::string& name, const Mlp& net) {
    out << "net " << name << " layers=" << net.layers.size() << " leak=" << format_double(net.leak) << " dims=";
    out << net.input_dim();
    for (const auto& layer : net.layers) out << ',' << layer.weights.rows();
    out << "\n";
}

void write_net_tensors(std::ostream& out, const Mlp& net) {
    for (const auto& layer : net.layers) {
        // row-major weights
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                const double v = layer.weights(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
    }
}

Mlp read_net(std::istream& in, const std::string& expect_name) {
    std::string line;
    std::getline(in, line);
    std::istringstream hdr(line);
    std::string tag, name, layers_kv, leak_kv, dims_kv;
    hdr >> tag >> name >> layers_kv >> leak_kv >> dims_kv;
    if (tag != "net" || name != expect_name) {
        throw std::invalid_argument("read_checkpoint: expected net " + expect_name);
    }
    auto value_of = [](const std::string& kv) { return kv.substr(kv.find('=') + 1); };
    const auto n_layers = std::stoul(value_of(layers_kv));
    Mlp net;
    net.leak = std::stod(value_of(leak_kv));
    std::vector<int> dims;
    {
        std::istringstream ds(value_of(dims_kv));
        std::string item;
        while (std::getline(ds, item, ',')) dims.push_back(std::stoi(item));
    }
    if (dims.size() != n_layers + 1) {
        throw std::invalid_argument("read_checkpoint: inconsistent layer dims");
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        MlpLayer layer;
        layer.weights.resize(dims[i + 1], dims[i]);
        layer.bias.resize(dims[i + 1]);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void read_net_tensors(std::istream& in, Mlp& net) {
    for (auto& layer : net.layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                double v = 0;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                layer.weights(r, c) = v;
            }
        }
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(sizeof(double) * layer.bias.size()));
    }
    if (!in) {
        throw std::invalid_argument("read_checkpoint: truncated tensor block");
    }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& file, const EncoderStack& stack) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::invalid_argument("write_checkpoint: cannot open " + file.string());
    }
    out << "transience-model v1\n";
    out << "flags use_autoencoder=" << int(stack.use_autoencoder)
        << " use_private=" << int(stack.use_private) << "\n";
    out << "dims d_z=" << stack.d_z << " d_z_tilde=" << stack.d_z_tilde << "\n";
    out << "kde_log_sigma " << format_double(stack.log_kde_sigma[0]) << ' '
        << format_double(stack.log_kde_sigma[1]) << ' '
        << format_double(stack.log_kde_sigma[2]) << "\n";
    write_net_header(out, "encoder_x", stack.encoder_x);
    write_net_header(out, "encoder_y", stack.encoder_y);
    if (stack.use_private) {
        write_net_header(out, "private_x", stack.private_x);
        write_net_header(out, "private_y", stack.private_y);
    }
    if (stack.use_autoencoder) {
        write_net_header(out, "decoder_x", stack.decoder_x);
        write_net_header(out, "decoder_y", stack.decoder_y);
    }
    out << "end-header\n";
    write_net_tensors(out, stack.encoder_x);
    write_net_tensors(out, stack.encoder_y);
    if (stack.use_private) {
        write_net_tensors(out, stack.private_x);
        write_net_tensors(out, stack.private_y);
    }
    if (stack.use_autoencoder) {
        write_net_tensors(out, stack.decoder_x);
        write_net_tensors(out, stack.decoder_y);
    }
}

EncoderStack read_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::invalid_argument("read_checkpoint: cannot open " + file.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "transience-model v1") {
        throw std::invalid_argument("read_checkpoint: unknown format tag in " + file.string());
    }
    EncoderStack stack;
    int use_ae = 0, use_priv = 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "flags use_autoencoder=%d use_private=%d", &use_ae, &use_priv) != 2) {
        throw std::invalid_argument("read_checkpoint: bad flags line");
    }
    stack.use_autoencoder = use_ae != 0;
    stack.use_private = use_priv != 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "dims d_z=%d d_z_tilde=%d", &stack.d_z, &stack.d_z_tilde) != 2) {
        throw std::invalid_argument("read_checkpoint: bad dims line");
    }
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "kde_log_sigma %lf %lf %lf", &stack.log_kde_sigma[0],
                    &stack.log_kde_sigma[1], &stack.log_kde_sigma[2]) != 3) {
        throw std::invalid_argument("read_checkpoint: bad kde line");
    }
    stack.encoder_x = read_net(in, "encoder_x");
    stack.encoder_y = read_net(in, "encoder_y");
    if (stack.use_private) {
        stack.private_x = read_net(in, "private_x");
        stack.private_y = read_net(in, "private_y");
    }
    if (stack.use_autoencoder) {
        stack.decoder_x = read_net(in, "decoder_x");
        stack.decoder_y = read_net(in, "decoder_y");
    }
    std::getline(in, line);
    if (line != "end-header") {
        throw std::invalid_argument("read_checkpoint: missing end-header");
    }
    read_net_tensors(in, stack.encoder_x);
    read_net_tensors(in, stack.encoder_y);
    if (stack.use_private) {
        read_net_tensors(in, stack.private_x);
        read_net_tensors(in, stack.private_y);
    }
    if (stack.use_autoencoder) {
        read_net_tensors(in, stack.decoder_x);
        read_net_tensors(in, stack.decoder_y);
    }
    return stack;
}

std::vector<ParamView> param_views(Mlp& net, const std::string& prefix) {
    std::vector<ParamView> views;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        views.push_back({prefix + ".w" + std::to_string(i), net.layers[i].weights.data(),
                         net.layers[i].weights.size()});
        views.push_back({prefix + ".b" + std::to_string(i), net.layers[i].bias.data(),
                         net.layers[i].bias.size()});
    }
    return views;
}

std::vector<ParamView> param_views(EncoderStack& stack, bool include_bandwidths) {
    std::vector<ParamView> views = param_views(stack.encoder_x, "encoder_x");
    auto append = [&](std::vector<ParamView> more) {
        views.insert(views.end(), more.begin(), more.end());
    };
    append(param_views(stack.encoder_y, "encoder_y"));
    if (stack.use_private) {
        append(param_views(stack.private_x, "private_x"));
        append(param_views(stack.private_y, "private_y"));
    }
    if (stack.use_autoencoder) {
        append(param_views(stack.decoder_x, "decoder_x"));
        append(param_views(stack.decoder_y, "decoder_y"));
    }
    if (include_bandwidths) {
        views.push_back({"kde.log_sigma", stack.log_kde_sigma.data(), 3});
    }
    return views;
}

std::vector<Eigen::VectorXd> flatten(const MlpGrads& grads) {
    std::vector<Eigen::VectorXd> flat;
    for (const auto& layer : grads.layers) {
        flat.emplace_back(Eigen::Map<const Eigen::VectorXd>(layer.weights.data(), layer.weights.size()));
        flat.emplace_back(layer.bias);
    }
    return flat;
}

GradCheckResult gradcheck(const std::function<double()>& value_fn,
                          const std::function<std::vector<Eigen::VectorXd>()>& grad_fn,
                          const std::vector<ParamView>& params,
                          int coords_per_tensor, double step, Rng& rng,
                          double denom_floor) {
    std::vector<Eigen::VectorXd> analytic = grad_fn();
    if (analytic.size() != params.size()) {
        throw std::invalid_argument("gradcheck: grad_fn must return one vector per param view");
    }
    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const ParamView& view = params[p];
        if (analytic[p].size() != view.size) {
            throw std::invalid_argument("gradcheck: gradient size mismatch for " + view.name);
        }
        const int n_coords = static_cast<int>(std::min<long>(coords_per_tensor, view.size));
        for (int k = 0; k < n_coords; ++k) {
            const long idx = (view.size <= coords_per_tensor)
                                 ? k
                                 : uniform_int(rng, 0, view.size - 1);
            const double original = view.data[idx];
            view.data[idx] = original + step;
            const double f_plus = value_fn();
            view.data[idx] = original - step;
            const double f_minus = value_fn();
            view.data[idx] = original;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw NumericalError("gradcheck: nonfinite loss while perturbing " + view.name);
            }
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double ga = analytic[p][idx];
            const double rel = std::abs(ga - numeric) /
                               std::max({std::abs(ga), std::abs(numeric), denom_floor});
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = view.name;
                result.worst_coord = idx;
                result.analytic = ga;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace transience
