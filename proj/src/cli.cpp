#include "runet/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "runet/checkpoint.hpp"
#include "runet/config.hpp"
#include "runet/data.hpp"
#include "runet/gradcheck_suite.hpp"
#include "runet/metrics.hpp"
#include "runet/train.hpp"

namespace runet {
namespace {

constexpr double kBudgetLow = 1.2e6;
constexpr double kBudgetHigh = 1.4e6;

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::size_t image_size_of(const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::runtime_error("dataset split is empty");
    const auto& s = samples.front();
    if (s.height != s.width) throw std::runtime_error("images must be square");
    return s.height;
}

struct GenDataArgs {
    std::string out;
    std::size_t n_train = 0, n_test = 0, size = 128;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    int stage = 1;
    std::string data, config, out, init;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, batch_size;
    std::optional<double> lr;
    bool augment = false;
};

struct EvalArgs {
    std::string model, data, split = "test", out;
};

struct InferArgs {
    std::string model, image, out_mask;
};

struct VerifyArgs {
    std::uint64_t seed = 0;
    std::string config;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
    const auto summary = generate_synthetic(a.out, a.n_train, a.n_test, a.size, a.seed);
    out << summary_json(summary) << '\n';
    return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig tc = TrainConfig::for_stage(a.stage);
    ModelConfig mc;
    bool explicit_input_size = false;
    bool augment = a.augment;
    if (!a.config.empty()) {
        const auto file = read_json_file(a.config);
        tc = train_config_from_json(file, tc);
        if (file.contains("model")) {
            mc = model_config_from_json(file.at("model"));
            explicit_input_size = file.at("model").contains("input_size");
        }
        if (file.contains("augment")) augment = augment || file.at("augment").get<bool>();
    }
    tc.stage = a.stage;
    if (a.seed) tc.seed = *a.seed;
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.batch_size) tc.batch_size = *a.batch_size;
    if (a.lr) tc.lr = *a.lr;
    tc.validate();

    const Dataset ds = load_dataset(a.data);
    std::vector<Sample> train = ds.split(Split::Train);
    const std::size_t size = image_size_of(train);
    if (augment) train = augment_all(train, AugmentSpec::standard());

    Model model;
    if (a.stage == 1) {
        if (!explicit_input_size) mc.input_size = size;
        model = build_model<float>(mc, tc.seed);
    } else {
        mc = config_from_checkpoint(a.init, size);
        model = load_checkpoint(a.init, mc);
        err << "encoder initialized from " << a.init << " (digest "
            << tensor_digest(model, is_classification_path) << ")\n";
    }
    if (mc.input_size != size)
        throw std::runtime_error("model input_size " + std::to_string(mc.input_size) + " does not match data size " +
                                 std::to_string(size));

    const char* metric = a.stage == 1 ? "dice" : "accuracy";
    auto on_epoch = [&](const EpochRecord& r) {
        err << "epoch " << r.epoch << '/' << tc.epochs << " loss=" << fmt6(r.mean_loss) << ' ' << metric << '='
            << fmt6(r.metric) << '\n';
    };
    const TrainHistory history =
        a.stage == 1 ? train_stage1(model, train, tc, on_epoch) : train_stage2(model, train, tc, on_epoch);

    save_checkpoint(model, a.out);
    write_text(a.out + ".history.jsonl", history.to_jsonl());
    nlohmann::ordered_json effective = to_json(tc);
    effective["augment"] = augment;
    effective["data"] = a.data;
    effective["init"] = a.init;
    effective["model"] = to_json(mc);
    write_text(a.out + ".config.json", effective.dump(2) + "\n");

    const std::string jsonl = history.to_jsonl();
    const auto last_line_start = jsonl.rfind('\n', jsonl.size() - 2);
    out << jsonl.substr(last_line_start == std::string::npos ? 0 : last_line_start + 1);
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Dataset ds = load_dataset(a.data);
    const std::vector<Sample> samples = ds.split(parse_split(a.split));
    Model model = load_checkpoint(a.model, config_from_checkpoint(a.model, image_size_of(samples)));
    const Evaluation ev = evaluate(model, samples);
    const std::string json = ev.report.to_json();
    write_text(a.out, json + "\n");
    out << json << '\n';
    return kExitOk;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
    const GrayImage img = read_pgm(a.image);
    if (img.width != img.height) throw std::runtime_error("image must be square");
    Model model = load_checkpoint(a.model, config_from_checkpoint(a.model, img.width));
    std::vector<float> pixels(img.pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    NoGradScope no_grad;
    auto result = forward_dual(model, Tensor::from({1, 1, img.height, img.width}, std::move(pixels)), Mode::Eval);
    GrayImage mask{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size())};
    const std::size_t plane = img.pixels.size();
    for (std::size_t i = 0; i < plane; ++i) mask.pixels[i] = result.segmentation[plane + i] >= 0.5f ? 255 : 0;
    write_pgm(a.out_mask, mask);
    out << "p_malignant=" << fmt6(result.classification[0]) << '\n';
    return kExitOk;
}

int cmd_gradcheck(const VerifyArgs& a, std::ostream& out) {
    bool ok = true;
    for (const auto& r : run_gradcheck_suite(a.seed)) {
        const bool pass = r.max_rel_error < kGradCheckTolerance;
        ok = ok && pass;
        out << r.layer << " max_rel_error=" << fmt6(r.max_rel_error) << (pass ? " ok" : " FAIL") << '\n';
    }
    out << "gradcheck " << (ok ? "passed" : "failed") << " (tolerance " << fmt6(kGradCheckTolerance) << ")\n";
    return ok ? kExitOk : kExitFailure;
}

int cmd_param_count(const VerifyArgs& a, std::ostream& out) {
    ModelConfig mc;
    if (!a.config.empty()) {
        const auto file = read_json_file(a.config);
        mc = model_config_from_json(file.contains("model") ? file.at("model") : file);
    }
    const std::size_t count = param_count(mc);
    const bool within = count >= kBudgetLow && count <= kBudgetHigh;
    out << count << '\n' << "within 1.3M band: " << (within ? "true" : "false") << '\n';
    return within ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Residual U-Net thyroid nodule segmentation/classification toolkit"};
    app.name("runet");
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a deterministic synthetic nodule dataset");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--n-train", gen.n_train, "Number of training samples (>= 2)")->required();
    gen_cmd->add_option("--n-test", gen.n_test, "Number of test samples (>= 2)")->required();
    gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
    gen_cmd->add_option("--size", gen.size, "Image side length in pixels")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand(
        "train",
        "Train stage 1 (segmentation) or stage 2 (classifier from stage-1 weights).\n"
        "Defaults: epochs 1, batch_size 4, lr 1e-3 (stage 1) / 1e-4 (stage 2), beta1 0.9, beta2 0.999,\n"
        "adam_eps 1e-8, seed 0, prob_clamp_eps 1e-7, augment false, model input_size = data image size.\n"
        "Config file keys override defaults; flags override the config file.");
    train_cmd->add_option("--stage", tr.stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    train_cmd->add_option("--data", tr.data, "Dataset directory (manifest.csv)")->required();
    train_cmd->add_option("--config", tr.config, "JSON config file");
    train_cmd->add_option("--out", tr.out, "Output checkpoint path")->required();
    train_cmd->add_option("--init", tr.init, "Stage-1 checkpoint (required for stage 2)");
    train_cmd->add_option("--seed", tr.seed, "Seed for initialization and shuffling");
    train_cmd->add_option("--epochs", tr.epochs, "Epoch count");
    train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
    train_cmd->add_flag("--augment", tr.augment, "Augment the train split with flips and blur");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    eval_cmd->add_option("--model", ev.model, "Checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    eval_cmd->add_option("--split", ev.split, "train or test")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Metrics JSON output path")->required();

    InferArgs inf;
    auto* infer_cmd = app.add_subcommand("infer", "Segment and classify one PGM image");
    infer_cmd->add_option("--model", inf.model, "Checkpoint")->required();
    infer_cmd->add_option("--image", inf.image, "Input PGM")->required();
    infer_cmd->add_option("--out-mask", inf.out_mask, "Output mask PGM")->required();

    VerifyArgs ver;
    auto* verify_cmd = app.add_subcommand("verify", "Verification suites");
    verify_cmd->require_subcommand(1);
    auto* gradcheck_cmd = verify_cmd->add_subcommand("gradcheck", "Finite-difference check of every layer");
    gradcheck_cmd->add_option("--seed", ver.seed, "Seed for inputs")->capture_default_str();
    auto* count_cmd = verify_cmd->add_subcommand("param-count", "Count trainable parameters");
    count_cmd->add_option("--config", ver.config, "JSON model config (optionally under a \"model\" key)");

    std::vector<const char*> argv{"runet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (train_cmd->parsed() && tr.stage == 2 && tr.init.empty())
            throw CLI::ValidationError("--init", "stage 2 requires --init CKPT");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
        if (train_cmd->parsed()) return cmd_train(tr, out, err);
        if (eval_cmd->parsed()) return cmd_eval(ev, out);
        if (infer_cmd->parsed()) return cmd_infer(inf, out);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(ver, out);
        if (count_cmd->parsed()) return cmd_param_count(ver, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace runet
