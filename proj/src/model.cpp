#include "runet/model.hpp"

#include <stdexcept>

#include "runet/rng.hpp"

namespace runet {

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid model config: " + what); };
    if (input_channels == 0) fail("input_channels must be >= 1");
    if (encoder_filters.size() != kStages) fail("encoder_filters must list 4 widths");
    if (decoder_filters.size() != kStages) fail("decoder_filters must list 4 widths");
    for (auto f : encoder_filters)
        if (f == 0) fail("encoder widths must be >= 1");
    for (auto f : decoder_filters)
        if (f == 0) fail("decoder widths must be >= 1");
    if (input_size == 0 || input_size % 16 != 0) fail("input_size must be a positive multiple of 16");
    if (cbam_reduction == 0 || encoder_filters[3] % cbam_reduction != 0)
        fail("encoder_filters[3] must be divisible by cbam_reduction");
    if (seg_classes < 2) fail("seg_classes must be >= 2");
    if (cls_outputs != 1) fail("cls_outputs must be 1");
}

namespace {

template <typename T, typename Fn>
void visit_batchnorm(const std::string& prefix, BatchNormState<T>& bn, Fn&& fn) {
    fn(prefix + ".gamma", bn.gamma, TensorKind::Param);
    fn(prefix + ".beta", bn.beta, TensorKind::Param);
    fn(prefix + ".running_mean", bn.running_mean, TensorKind::Buffer);
    fn(prefix + ".running_var", bn.running_var, TensorKind::Buffer);
}

template <typename T, typename Fn>
void visit_conv(const std::string& prefix, ConvParams<T>& conv, Fn&& fn) {
    fn(prefix + ".weight", conv.weight, TensorKind::Param);
    fn(prefix + ".bias", conv.bias, TensorKind::Param);
}

template <typename T, typename Fn>
void visit_stage(const std::string& prefix, StageBlock<T>& stage, Fn&& fn) {
    visit_conv(prefix + ".conv", stage.conv, fn);
    visit_batchnorm(prefix + ".bn", stage.bn, fn);
    for (std::size_t r = 0; r < stage.res.size(); ++r) {
        const std::string rp = prefix + ".res" + std::to_string(r + 1);
        visit_conv(rp + ".conv1", stage.res[r].conv1, fn);
        visit_batchnorm(rp + ".bn1", stage.res[r].bn1, fn);
        visit_conv(rp + ".conv2", stage.res[r].conv2, fn);
        visit_batchnorm(rp + ".bn2", stage.res[r].bn2, fn);
    }
}

template <typename T, typename Fn>
void visit_model(BasicModel<T>& m, Fn&& fn) {
    for (std::size_t i = 0; i < kStages; ++i) visit_stage("enc" + std::to_string(i + 1), m.encoder[i], fn);
    fn("cbam.mlp1.weight", m.attention.mlp1.weight, TensorKind::Param);
    fn("cbam.mlp1.bias", m.attention.mlp1.bias, TensorKind::Param);
    fn("cbam.mlp2.weight", m.attention.mlp2.weight, TensorKind::Param);
    fn("cbam.mlp2.bias", m.attention.mlp2.bias, TensorKind::Param);
    visit_conv("cbam.spatial", m.attention.spatial, fn);
    for (std::size_t i = 0; i < kStages; ++i) visit_stage("dec" + std::to_string(i + 1), m.decoder[i], fn);
    visit_conv("seg_head", m.seg_head, fn);
    fn("classifier.weight", m.classifier.weight, TensorKind::Param);
    fn("classifier.bias", m.classifier.bias, TensorKind::Param);
}

template <typename T>
StageBlock<T> make_stage(std::size_t in, std::size_t out, std::uint64_t seed, std::uint64_t& stream) {
    StageBlock<T> s;
    s.conv = make_conv<T>(in, out, 3, SplitMix64::derive(seed, stream++));
    s.bn = make_batchnorm<T>(out);
    for (auto& r : s.res) {
        const auto s1 = SplitMix64::derive(seed, stream++);
        const auto s2 = SplitMix64::derive(seed, stream++);
        r = make_residual_block<T>(out, s1, s2);
    }
    return s;
}

template <typename T>
void check_input(const BasicModel<T>& m, const BasicTensor<T>& batch) {
    const auto& c = m.config;
    if (batch.rank() != 4 || batch.dim(1) != c.input_channels || batch.dim(2) != c.input_size ||
        batch.dim(3) != c.input_size)
        throw ShapeError("model input must be (N, " + std::to_string(c.input_channels) + ", " +
                         std::to_string(c.input_size) + ", " + std::to_string(c.input_size) + "), got " +
                         shape_str(batch.shape()));
}

template <typename T>
BasicTensor<T> run_stage(StageBlock<T>& stage, const BasicTensor<T>& x, Mode mode) {
    auto h = relu(batchnorm2d(conv2d(x, stage.conv), stage.bn, mode));
    for (auto& r : stage.res) h = residual_block(h, r, mode);
    return h;
}

template <typename T>
struct EncoderOutput {
    std::array<BasicTensor<T>, kStages> skips;
    CbamOutput<T> attention;
};

template <typename T>
EncoderOutput<T> run_encoder(BasicModel<T>& m, const BasicTensor<T>& batch, Mode mode) {
    check_input(m, batch);
    EncoderOutput<T> out;
    auto h = coordconv_augment(batch);
    for (std::size_t i = 0; i < kStages; ++i) {
        out.skips[i] = run_stage(m.encoder[i], h, mode);
        h = maxpool2x2(out.skips[i]);
    }
    out.attention = cbam(h, m.attention);
    return out;
}

template <typename T>
BasicTensor<T> run_classifier(BasicModel<T>& m, const BasicTensor<T>& refined) {
    auto logits = dense(global_avg_pool(refined), m.classifier);
    return reshape(sigmoid(logits), Shape{refined.dim(0)});
}

template <typename T>
BasicTensor<T> run_decoder(BasicModel<T>& m, const EncoderOutput<T>& enc, Mode mode) {
    auto d = enc.attention.refined;
    for (std::size_t i = 0; i < kStages; ++i) {
        d = concat_channels(upsample_nearest2x(d), enc.skips[kStages - 1 - i]);
        d = run_stage(m.decoder[i], d, mode);
    }
    return softmax_channel(conv2d(d, m.seg_head));
}

}  // namespace

template <typename T>
std::vector<NamedTensor<T>> BasicModel<T>::named_tensors() const {
    std::vector<NamedTensor<T>> out;
    visit_model(const_cast<BasicModel&>(*this), [&](const std::string& name, BasicTensor<T>& t, TensorKind kind) {
        out.push_back({name, t, kind});
    });
    return out;
}

template <typename T>
std::vector<NamedTensor<T>> BasicModel<T>::parameters() const {
    std::vector<NamedTensor<T>> out;
    for (auto& nt : named_tensors())
        if (nt.kind == TensorKind::Param) out.push_back(std::move(nt));
    return out;
}

template <typename T>
BasicModel<T> BasicModel<T>::clone() const {
    return cast<T>();
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
    BasicModel<U> copy = build_model<U>(config, 0);
    auto src = named_tensors();
    auto dst = copy.named_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) {
        auto s = src[i].tensor.data();
        auto d = dst[i].tensor.data();
        for (std::size_t k = 0; k < s.size(); ++k) d[k] = static_cast<U>(s[k]);
    }
    return copy;
}

template <typename T>
BasicModel<T> build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    BasicModel<T> m;
    m.config = config;
    std::uint64_t stream = 0;
    std::size_t prev = config.input_channels + 2;  // coordinate channels
    for (std::size_t i = 0; i < kStages; ++i) {
        m.encoder[i] = make_stage<T>(prev, config.encoder_filters[i], seed, stream);
        prev = config.encoder_filters[i];
    }
    const auto s1 = SplitMix64::derive(seed, stream++);
    const auto s2 = SplitMix64::derive(seed, stream++);
    const auto s3 = SplitMix64::derive(seed, stream++);
    m.attention = make_cbam<T>(prev, config.cbam_reduction, s1, s2, s3);
    for (std::size_t i = 0; i < kStages; ++i) {
        const std::size_t skip = config.encoder_filters[kStages - 1 - i];
        m.decoder[i] = make_stage<T>(prev + skip, config.decoder_filters[i], seed, stream);
        prev = config.decoder_filters[i];
    }
    m.seg_head = make_conv<T>(prev, config.seg_classes, 1, SplitMix64::derive(seed, stream++));
    m.classifier = make_dense<T>(config.encoder_filters[kStages - 1], config.cls_outputs,
                                 SplitMix64::derive(seed, stream++));
    return m;
}

template <typename T>
std::size_t param_count(const BasicModel<T>& model) {
    std::size_t total = 0;
    for (const auto& nt : model.parameters()) total += nt.tensor.numel();
    return total;
}

std::size_t param_count(const ModelConfig& config) {
    config.validate();
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return k * k * in * out + out; };
    auto stage = [&](std::size_t in, std::size_t out) { return conv(in, out, 3) + 4 * conv(out, out, 3) + 5 * 2 * out; };
    std::size_t total = 0;
    std::size_t prev = config.input_channels + 2;
    for (auto f : config.encoder_filters) {
        total += stage(prev, f);
        prev = f;
    }
    const std::size_t hidden = prev / config.cbam_reduction;
    total += hidden * prev + hidden + prev * hidden + prev + conv(2, 1, 7);
    for (std::size_t i = 0; i < kStages; ++i) {
        total += stage(prev + config.encoder_filters[kStages - 1 - i], config.decoder_filters[i]);
        prev = config.decoder_filters[i];
    }
    total += conv(prev, config.seg_classes, 1);
    total += config.encoder_filters[kStages - 1] * config.cls_outputs + config.cls_outputs;
    return total;
}

template <typename T>
BasicTensor<T> forward_segmentation(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode) {
    auto enc = run_encoder(model, batch, mode);
    return run_decoder(model, enc, mode);
}

template <typename T>
BasicTensor<T> forward_classification(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode) {
    auto enc = run_encoder(model, batch, mode);
    return run_classifier(model, enc.attention.refined);
}

template <typename T>
DualOutput<T> forward_dual(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode) {
    auto enc = run_encoder(model, batch, mode);
    DualOutput<T> out;
    out.classification = run_classifier(model, enc.attention.refined);
    out.segmentation = run_decoder(model, enc, mode);
    out.attention = enc.attention;
    return out;
}

bool is_classification_path(const std::string& name) {
    return name.starts_with("enc") || name.starts_with("cbam.") || name.starts_with("classifier.");
}

#define RUNET_INSTANTIATE_MODEL(T)                                                           \
    template struct BasicModel<T>;                                                           \
    template BasicModel<T> build_model(const ModelConfig&, std::uint64_t);                   \
    template std::size_t param_count(const BasicModel<T>&);                                  \
    template BasicTensor<T> forward_segmentation(BasicModel<T>&, const BasicTensor<T>&, Mode); \
    template BasicTensor<T> forward_classification(BasicModel<T>&, const BasicTensor<T>&, Mode); \
    template DualOutput<T> forward_dual(BasicModel<T>&, const BasicTensor<T>&, Mode);

RUNET_INSTANTIATE_MODEL(float)
RUNET_INSTANTIATE_MODEL(double)
template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;

}  // namespace runet
