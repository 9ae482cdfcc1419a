// stdn: train / segment / eval / probe / gradcheck for shape-tailored
// descriptor networks. Exit codes: 0 success, 1 numerical failure, 2 usage/IO.

#include "stdn/common.hpp"
#include "stdn/descriptor.hpp"
#include "stdn/evalmetrics.hpp"
#include "stdn/poisson.hpp"
#include "stdn/probe.hpp"
#include "stdn/raster.hpp"
#include "stdn/segment.hpp"
#include "stdn/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------- config ----------

struct ParsedValue {
    std::string text;
};

using ConfigMap = std::map<std::string, std::string>;

bool parse_long(const std::string& s, long& out) {
    try {
        std::size_t pos = 0;
        out = std::stol(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_double_str(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(out);
    } catch (...) {
        return false;
    }
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    try {
        std::size_t pos = 0;
        out = std::stoull(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// Known keys with a validator; "" means the value is acceptable.
using Check = std::function<std::string(const std::string&)>;

Check int_in(long lo, long hi) {
    return [lo, hi](const std::string& v) -> std::string {
        long x;
        if (!parse_long(v, x)) return "expected an integer";
        if (x < lo || x > hi)
            return "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
        return "";
    };
}

Check real_min(double lo, bool strict) {
    return [lo, strict](const std::string& v) -> std::string {
        double x;
        if (!parse_double_str(v, x)) return "expected a real number";
        if (strict ? x <= lo : x < lo)
            return std::string("must be ") + (strict ? "> " : ">= ") + std::to_string(lo);
        return "";
    };
}

Check u64_any() {
    return [](const std::string& v) -> std::string {
        std::uint64_t x;
        return parse_u64(v, x) ? "" : "expected an unsigned integer";
    };
}

Check real_list_min(double lo) {
    return [lo](const std::string& v) -> std::string {
        for (const std::string& item : split_list(v)) {
            double x;
            if (!parse_double_str(item, x) || x < lo)
                return "expected a comma list of reals >= " + std::to_string(lo);
        }
        return "";
    };
}

Check u64_list() {
    return [](const std::string& v) -> std::string {
        for (const std::string& item : split_list(v)) {
            std::uint64_t x;
            if (!parse_u64(item, x)) return "expected a comma list of unsigned integers";
        }
        return "";
    };
}

Check one_of(std::vector<std::string> allowed) {
    return [allowed](const std::string& v) -> std::string {
        for (const auto& a : allowed)
            if (v == a) return "";
        std::string msg = "expected one of:";
        for (const auto& a : allowed) msg += " " + a;
        return msg;
    };
}

const std::map<std::string, Check>& key_registry() {
    static const std::map<std::string, Check> reg = {
        {"threads", int_in(1, 1024)},
        {"seed", u64_any()},
        {"learning_rate", real_min(0.0, true)},
        {"momentum", real_min(0.0, false)},
        {"grad_clip", real_min(0.0, false)}, // 0 disables clipping
        {"epochs", int_in(0, 1000000)},
        {"batch", int_in(1, 1000000)},
        {"downsample_factor", int_in(0, 4096)},
        {"solver_tolerance", real_min(0.0, false)}, // 0 keeps module defaults
        {"regions", int_in(2, 255)},
        {"beta", real_min(0.0, false)},
        {"dt", real_min(0.0, true)},
        {"inner_steps", int_in(1, 1000000)},
        {"dilation_radius", int_in(1, 4096)},
        {"max_iterations", int_in(1, 1000000)},
        {"stable_iterations", int_in(1, 1000000)},
        {"curvature_epsilon", real_min(0.0, true)},
        {"boundary_tol", real_min(0.0, false)},
        {"norms", real_list_min(0.0)},
        {"probe_seeds", u64_list()},
        {"n_max", int_in(0, 4096)},
        {"shift_y", int_in(-100000, 100000)},
        {"shift_x", int_in(-100000, 100000)},
        {"probe_mode", one_of({"both", "covariance", "sweep"})},
        {"alpha_rescale", real_min(0.0, true)},
    };
    return reg;
}

ConfigMap default_config() {
    return {
        {"threads", "1"},
        {"seed", "1"},
        {"learning_rate", "1"},
        {"momentum", "0"},
        {"grad_clip", "0.5"},
        {"epochs", "40"},
        {"batch", "4"},
        {"downsample_factor", "0"},
        {"solver_tolerance", "0"},
        {"regions", "2"},
        {"beta", "1"},
        {"dt", "0.1"},
        {"inner_steps", "5"},
        {"dilation_radius", "3"},
        {"max_iterations", "100"},
        {"stable_iterations", "2"},
        {"curvature_epsilon", "1e-8"},
        {"boundary_tol", "2"},
        {"norms", "10,20,30,40,50,60,70,80"},
        {"probe_seeds", "1,2,3,4,5"},
        {"n_max", "10"},
        {"shift_y", "0"},
        {"shift_x", "0"},
        {"probe_mode", "both"},
        {"alpha_rescale", "1"},
    };
}

void set_config_value(ConfigMap& cfg, const std::string& key, const std::string& value,
                      const std::string& where) {
    auto it = key_registry().find(key);
    if (it == key_registry().end())
        throw stdn::io_error("unknown config key '" + key + "' (" + where + ")");
    std::string err = it->second(value);
    if (!err.empty())
        throw stdn::io_error("bad value for '" + key + "' (" + where + "): " + err);
    cfg[key] = value;
}

void load_config_file(ConfigMap& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw stdn::io_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = path + ":" + std::to_string(lineno);
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw stdn::io_error("expected 'key = value' (" + where + ")");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
        set_config_value(cfg, key, value, where);
    }
}

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw stdn::io_error("--set expects key=value, got '" + s + "'");
        set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1), "--set");
    }
}

long cfg_long(const ConfigMap& cfg, const std::string& key) {
    long v = 0;
    parse_long(cfg.at(key), v);
    return v;
}

double cfg_real(const ConfigMap& cfg, const std::string& key) {
    double v = 0;
    parse_double_str(cfg.at(key), v);
    return v;
}

std::uint64_t cfg_u64(const ConfigMap& cfg, const std::string& key) {
    std::uint64_t v = 0;
    parse_u64(cfg.at(key), v);
    return v;
}

std::vector<double> cfg_real_list(const ConfigMap& cfg, const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : split_list(cfg.at(key))) {
        double v;
        parse_double_str(item, v);
        out.push_back(v);
    }
    return out;
}

std::vector<std::uint64_t> cfg_u64_list(const ConfigMap& cfg, const std::string& key) {
    std::vector<std::uint64_t> out;
    for (const std::string& item : split_list(cfg.at(key))) {
        std::uint64_t v;
        parse_u64(item, v);
        out.push_back(v);
    }
    return out;
}

std::string config_hash(const ConfigMap& cfg) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : cfg) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

// ---------- shared helpers ----------

stdn::TrainConfig train_config_from(const ConfigMap& cfg) {
    stdn::TrainConfig tc;
    tc.learning_rate = cfg_real(cfg, "learning_rate");
    tc.momentum = cfg_real(cfg, "momentum");
    tc.grad_clip = cfg_real(cfg, "grad_clip");
    tc.epochs = static_cast<int>(cfg_long(cfg, "epochs"));
    tc.batch = static_cast<int>(cfg_long(cfg, "batch"));
    tc.downsample_factor = static_cast<int>(cfg_long(cfg, "downsample_factor"));
    tc.seed = cfg_u64(cfg, "seed");
    double tol = cfg_real(cfg, "solver_tolerance");
    if (tol > 0.0) tc.solver.tolerance = tol;
    return tc;
}

stdn::SegmentParams segment_params_from(const ConfigMap& cfg) {
    stdn::SegmentParams sp;
    sp.num_regions = static_cast<int>(cfg_long(cfg, "regions"));
    sp.beta = cfg_real(cfg, "beta");
    sp.dt = cfg_real(cfg, "dt");
    sp.inner_steps = static_cast<int>(cfg_long(cfg, "inner_steps"));
    sp.dilation_radius = static_cast<int>(cfg_long(cfg, "dilation_radius"));
    sp.max_iterations = static_cast<int>(cfg_long(cfg, "max_iterations"));
    sp.stable_iterations = static_cast<int>(cfg_long(cfg, "stable_iterations"));
    sp.curvature_epsilon = cfg_real(cfg, "curvature_epsilon");
    double tol = cfg_real(cfg, "solver_tolerance");
    if (tol > 0.0) sp.solver.tolerance = tol;
    return sp;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& inputs,
                    const ConfigMap& cfg, const std::vector<std::string>& artifacts) {
    json m;
    m["command"] = command;
    m["inputs"] = inputs;
    m["config"] = json::object();
    for (const auto& [k, v] : cfg) m["config"][k] = v;
    m["config_hash"] = config_hash(cfg);
    m["artifacts"] = artifacts;
    std::ofstream f(out_dir / "manifest.json");
    if (!f) throw stdn::io_error("cannot write manifest in " + out_dir.string());
    f << m.dump(2) << "\n";
}

void ensure_out_dir(const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw stdn::io_error("cannot create output directory: " + out_dir.string());
}

stdn::DescriptorNet load_net_for_inference(const std::string& weights, const ConfigMap& cfg) {
    stdn::DescriptorNet net = stdn::load_weights(weights);
    double rescale = cfg_real(cfg, "alpha_rescale");
    if (rescale != 1.0) net = stdn::with_scaled_alpha(net, rescale);
    return net;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(12);
    s << v;
    return s.str();
}

// ---------- subcommands ----------

int cmd_train(const std::string& data_dir, const std::string& out_dir, const ConfigMap& cfg) {
    if (!fs::is_directory(data_dir))
        throw stdn::io_error("dataset directory does not exist: " + data_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<std::pair<stdn::ChannelField, stdn::LabelMap>> dataset;
    json inputs = json::array();
    for (const fs::path& p : files) {
        std::string ext = p.extension().string();
        std::string stem = p.stem().string();
        if ((ext != ".png" && ext != ".ppm" && ext != ".pgm") || stem.ends_with("_labels"))
            continue;
        fs::path lab = p.parent_path() / (stem + "_labels.pgm");
        if (!fs::exists(lab)) lab = p.parent_path() / (stem + "_labels.png");
        if (!fs::exists(lab))
            throw stdn::io_error("no label map for image " + p.string() +
                                 " (expected " + stem + "_labels.pgm)");
        dataset.emplace_back(stdn::load_image(p.string()), stdn::load_labels(lab.string()));
        inputs.push_back({{"image", p.string()}, {"labels", lab.string()}});
    }
    if (dataset.empty()) throw stdn::io_error("no (image, label) pairs in " + data_dir);

    stdn::TrainConfig tc = train_config_from(cfg);
    stdn::DescriptorNet net = stdn::make_default_net(tc.seed);
    stdn::TrainResult result = stdn::train(net, dataset, tc);

    ensure_out_dir(out_dir);
    fs::path out(out_dir);
    stdn::save_weights((out / "weights.stdn").string(), result.net);
    {
        std::ofstream csv(out / "loss.csv");
        csv << "epoch,consistency,discrimination,total\n";
        for (std::size_t e = 0; e < result.history.size(); ++e)
            csv << e + 1 << "," << fmt(result.history[e].consistency) << ","
                << fmt(result.history[e].discrimination) << "," << fmt(result.history[e].total)
                << "\n";
        if (!csv) throw stdn::io_error("cannot write loss.csv");
    }
    write_manifest(out, "train", inputs, cfg,
                   {"weights.stdn", "weights.stdn.txt", "loss.csv"});
    if (!result.history.empty())
        std::cout << "trained " << dataset.size() << " images, " << result.history.size()
                  << " epochs, final loss " << fmt(result.history.back().total) << "\n";
    return 0;
}

int cmd_segment(const std::string& image_path, const std::string& weights,
                const std::string& out_dir, const ConfigMap& cfg) {
    stdn::ChannelField image = stdn::load_image(image_path);
    stdn::DescriptorNet net = load_net_for_inference(weights, cfg);
    stdn::SegmentParams sp = segment_params_from(cfg);
    stdn::SegmentResult result = stdn::segment(image, net, sp);

    ensure_out_dir(out_dir);
    fs::path out(out_dir);
    stdn::save_labels((out / "labels.pgm").string(), result.labels);
    {
        std::ofstream csv(out / "diagnostics.csv");
        csv << "iteration,energy,label_changes,frozen";
        for (int i = 0; i < sp.num_regions; ++i) csv << ",area_" << i;
        csv << "\n";
        for (std::size_t it = 0; it < result.history.size(); ++it) {
            const stdn::StepDiagnostics& d = result.history[it];
            csv << it + 1 << "," << fmt(d.energy) << "," << d.label_changes << ","
                << d.frozen_regions;
            for (long a : d.region_areas) csv << "," << a;
            csv << "\n";
        }
        if (!csv) throw stdn::io_error("cannot write diagnostics.csv");
    }
    write_manifest(out, "segment", {{"image", image_path}, {"weights", weights}}, cfg,
                   {"labels.pgm", "diagnostics.csv"});
    std::cout << (result.converged ? "converged" : "iteration cap reached") << " after "
              << result.iterations << " iterations\n";
    return 0;
}

int cmd_eval(const std::string& seg_path, const std::string& gt_path, const std::string& out_dir,
             const ConfigMap& cfg) {
    stdn::LabelMap seg = stdn::load_labels(seg_path);
    stdn::LabelMap gt = stdn::load_labels(gt_path);
    stdn::ScoreReport r = stdn::evaluate(seg, gt, cfg_real(cfg, "boundary_tol"));
    std::string header = "gt_covering,rand_index,voi,boundary_f";
    std::string row = fmt(r.gt_covering) + "," + fmt(r.rand_index) + "," + fmt(r.voi) + "," +
                      fmt(r.boundary_f);
    std::cout << header << "\n" << row << "\n";
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        fs::path out(out_dir);
        std::ofstream csv(out / "eval.csv");
        csv << header << "\n" << row << "\n";
        if (!csv) throw stdn::io_error("cannot write eval.csv");
        write_manifest(out, "eval", {{"seg", seg_path}, {"gt", gt_path}}, cfg, {"eval.csv"});
    }
    return 0;
}

int cmd_probe(const std::string& image_path, const std::string& weights,
              const std::string& out_dir, const ConfigMap& cfg) {
    stdn::ChannelField image = stdn::load_image(image_path);
    stdn::DescriptorNet net = load_net_for_inference(weights, cfg);
    stdn::SegmentParams sp = segment_params_from(cfg);
    stdn::Pipeline pipeline = [&](const stdn::ChannelField& img) {
        return stdn::segment(img, net, sp).labels;
    };

    ensure_out_dir(out_dir);
    fs::path out(out_dir);
    std::vector<std::string> artifacts;
    std::string mode = cfg.at("probe_mode");
    int sy = static_cast<int>(cfg_long(cfg, "shift_y"));
    int sx = static_cast<int>(cfg_long(cfg, "shift_x"));

    if (mode == "both" || mode == "covariance") {
        std::ofstream csv(out / "covariance.csv");
        csv << "theta,shift_y,shift_x,score\n";
        stdn::LabelMap seg_orig = pipeline(image);
        for (int q = 1; q <= 3; ++q) {
            double theta = q * (M_PI / 2.0);
            // Quarter turns carry the oriented-gradient channels into the
            // rotated frame, so the transformed arm runs the conjugated net.
            std::optional<stdn::DescriptorNet> conj = stdn::conjugate_quarter_turn(net, q);
            const stdn::DescriptorNet& arm = conj ? *conj : net;
            stdn::RegionMask full = stdn::RegionMask::full(image.height(), image.width());
            stdn::Transformed t = stdn::rotate_translate(image, full, theta, sy, sx);
            stdn::LabelMap seg_trans = stdn::segment(t.image, arm, sp).labels;
            stdn::LabelMap reference = stdn::rotate_translate_labels(seg_orig, theta, sy, sx);
            double score = stdn::agreement_score(seg_trans, reference, t.valid);
            csv << fmt(theta) << "," << sy << "," << sx << "," << fmt(score) << "\n";
            std::cout << "covariance theta=" << fmt(theta) << " score=" << fmt(score) << "\n";
        }
        if (sy != 0 || sx != 0) {
            double score = stdn::covariance_score(pipeline, image, 0.0, sy, sx);
            csv << "0," << sy << "," << sx << "," << fmt(score) << "\n";
            std::cout << "covariance shift-only score=" << fmt(score) << "\n";
        }
        if (!csv) throw stdn::io_error("cannot write covariance.csv");
        artifacts.push_back("covariance.csv");
    }
    if (mode == "both" || mode == "sweep") {
        std::vector<stdn::SweepRow> rows =
            stdn::robustness_sweep(pipeline, image, cfg_real_list(cfg, "norms"),
                                   cfg_u64_list(cfg, "probe_seeds"),
                                   static_cast<int>(cfg_long(cfg, "n_max")));
        std::ofstream csv(out / "sweep.csv");
        csv << "norm_sq,seed,gt_covering,rand_index\n";
        for (const stdn::SweepRow& r : rows)
            csv << fmt(r.norm_sq) << "," << r.seed << "," << fmt(r.gt_cov) << "," << fmt(r.rand)
                << "\n";
        if (!csv) throw stdn::io_error("cannot write sweep.csv");
        artifacts.push_back("sweep.csv");
        std::cout << "sweep: " << rows.size() << " rows\n";
    }
    write_manifest(out, "probe", {{"image", image_path}, {"weights", weights}}, cfg, artifacts);
    return 0;
}

int cmd_gradcheck(const std::string& out_dir, const ConfigMap& cfg) {
    std::uint64_t seed = cfg_u64(cfg, "seed");
    stdn::PreprocessSpec spec;
    spec.angles = stdn::PreprocessSpec::standard().angles;
    spec.scales = {5.0};
    stdn::DescriptorNet net = stdn::make_net(spec, {6, 3}, 5.0, seed);

    stdn::Rng rng(seed + 99);
    stdn::ChannelField image(8, 8, 3);
    for (double& v : image.data()) v = rng.uniform();
    stdn::LabelMap labels(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x) labels.set(y, x, 1);

    stdn::SolverOptions solver{1e-14, 0};
    auto loss_of = [&](const stdn::DescriptorNet& w) {
        int ch = w.layers.back().out_channels;
        stdn::ChannelField composite(8, 8, ch);
        for (int r = 0; r < labels.num_labels(); ++r) {
            stdn::RegionMask mask = labels.mask_of(static_cast<std::uint8_t>(r));
            stdn::ChannelField F = stdn::forward(w, image, mask, solver);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    if (labels.at(y, x) == r)
                        for (int c = 0; c < ch; ++c) composite.at(c, y, x) = F.at(c, y, x);
        }
        return stdn::loss(composite, labels).total;
    };

    stdn::GradResult analytic = stdn::gradients(net, image, labels, solver);
    const double eps = 1e-5;
    double max_rel = 0.0;
    long bad = 0, total = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto check_param = [&](double& slot, double grad) {
            double keep = slot;
            slot = keep + eps;
            double up = loss_of(net);
            slot = keep - eps;
            double down = loss_of(net);
            slot = keep;
            double fd = (up - down) / (2.0 * eps);
            double diff = std::abs(fd - grad);
            double scale = std::max(std::abs(fd), std::abs(grad));
            double rel = diff / std::max(scale, 1e-12);
            if (diff >= std::max(1e-4 * scale, 1e-8)) ++bad;
            max_rel = std::max(max_rel, rel);
            ++total;
        };
        for (std::size_t j = 0; j < net.layers[l].weight.size(); ++j)
            check_param(net.layers[l].weight[j], analytic.grads[l].weight[j]);
        for (std::size_t j = 0; j < net.layers[l].bias.size(); ++j)
            check_param(net.layers[l].bias[j], analytic.grads[l].bias[j]);
    }

    // Forward/reverse consistency in a random direction.
    stdn::NetGradients dir = stdn::zero_gradients(net);
    for (auto& l : dir) {
        for (double& v : l.weight) v = rng.normal();
        for (double& v : l.bias) v = rng.normal();
    }
    stdn::ChannelField cot = stdn::loss_cotangent(analytic.descriptor, labels);
    double fwd = 0.0;
    for (int r = 0; r < labels.num_labels(); ++r) {
        stdn::RegionMask mask = labels.mask_of(static_cast<std::uint8_t>(r));
        stdn::ForwardCache cache = stdn::forward_cached(net, image, mask, solver);
        stdn::ChannelField dF = stdn::jvp_params(net, cache, mask, dir);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                if (labels.at(y, x) == r)
                    for (int c = 0; c < dF.channels(); ++c)
                        fwd += dF.at(c, y, x) * cot.at(c, y, x);
    }
    double rev = 0.0;
    for (std::size_t l = 0; l < dir.size(); ++l) {
        for (std::size_t j = 0; j < dir[l].weight.size(); ++j)
            rev += dir[l].weight[j] * analytic.grads[l].weight[j];
        for (std::size_t j = 0; j < dir[l].bias.size(); ++j)
            rev += dir[l].bias[j] * analytic.grads[l].bias[j];
    }
    double dot_gap = std::abs(fwd - rev) / std::max({1.0, std::abs(fwd), std::abs(rev)});

    bool ok = bad == 0 && dot_gap < 1e-8;
    std::cout << "gradcheck: " << total << " parameters, max rel err " << fmt(max_rel)
              << ", dot-product gap " << fmt(dot_gap) << (ok ? " -> pass" : " -> FAIL") << "\n";
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        fs::path out(out_dir);
        std::ofstream csv(out / "gradcheck.csv");
        csv << "parameters,failed,max_rel_err,dot_gap,pass\n";
        csv << total << "," << bad << "," << fmt(max_rel) << "," << fmt(dot_gap) << ","
            << (ok ? 1 : 0) << "\n";
        if (!csv) throw stdn::io_error("cannot write gradcheck.csv");
        write_manifest(out, "gradcheck", json::object(), cfg, {"gradcheck.csv"});
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shape-tailored descriptor networks: train, segment, evaluate, probe"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, image_path, weights_path, seg_path, gt_path;
    std::vector<std::string> sets;
    long threads_flag = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--set", sets, "override one config key (key=value)");
        sub->add_option("--threads", threads_flag, "worker thread cap");
    };

    CLI::App* train = app.add_subcommand("train", "train a descriptor net on an image/label dir");
    train->add_option("--data", data_dir, "directory of images with *_labels.pgm companions")
        ->required();
    train->add_option("--out", out_dir, "output directory")->required();
    add_common(train);

    CLI::App* segment = app.add_subcommand("segment", "segment an image with trained weights");
    segment->add_option("--image", image_path, "input image")->required();
    segment->add_option("--weights", weights_path, "weights file")->required();
    segment->add_option("--out", out_dir, "output directory")->required();
    add_common(segment);

    CLI::App* eval = app.add_subcommand("eval", "score a segmentation against ground truth");
    eval->add_option("--seg", seg_path, "segmentation label map")->required();
    eval->add_option("--gt", gt_path, "ground-truth label map")->required();
    eval->add_option("--out", out_dir, "optional output directory");
    add_common(eval);

    CLI::App* probe = app.add_subcommand("probe", "covariance and deformation-robustness checks");
    probe->add_option("--image", image_path, "input image")->required();
    probe->add_option("--weights", weights_path, "weights file")->required();
    probe->add_option("--out", out_dir, "output directory")->required();
    add_common(probe);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck->add_option("--out", out_dir, "optional output directory");
    add_common(gradcheck);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        ConfigMap cfg = default_config();
        if (!config_path.empty()) load_config_file(cfg, config_path);
        apply_overrides(cfg, sets);
        if (threads_flag > 0) cfg["threads"] = std::to_string(threads_flag);
        stdn::set_max_threads(static_cast<int>(cfg_long(cfg, "threads")));

        if (train->parsed()) return cmd_train(data_dir, out_dir, cfg);
        if (segment->parsed()) return cmd_segment(image_path, weights_path, out_dir, cfg);
        if (eval->parsed()) return cmd_eval(seg_path, gt_path, out_dir, cfg);
        if (probe->parsed()) return cmd_probe(image_path, weights_path, out_dir, cfg);
        if (gradcheck->parsed()) return cmd_gradcheck(out_dir, cfg);
        return 2;
    } catch (const stdn::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const stdn::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
