#include "runet/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "runet/rng.hpp"

namespace runet {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

namespace {

thread_local ComputationRecord* t_active = nullptr;
thread_local bool t_recording = true;
thread_local BranchFingerprint* t_fingerprint = nullptr;
bool g_finite_checks = false;

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (std::size_t e : shape)
        if (e == 0) throw ShapeError("tensor extent must be >= 1, got " + shape_str(shape));
}

}  // namespace

// --- ComputationRecord -----------------------------------------------------

ComputationRecord::ComputationRecord() : previous_(t_active) { t_active = this; }

ComputationRecord::~ComputationRecord() { t_active = previous_; }

ComputationRecord* ComputationRecord::active() { return t_recording ? t_active : nullptr; }

std::size_t ComputationRecord::append(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

void ComputationRecord::replay_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
    nodes_.clear();
}

NoGradScope::NoGradScope() : previous_(t_recording) { t_recording = false; }
NoGradScope::~NoGradScope() { t_recording = previous_; }

bool recording_enabled() { return t_recording && t_active != nullptr; }

BranchFingerprint::BranchFingerprint() : previous_(t_fingerprint) { t_fingerprint = this; }
BranchFingerprint::~BranchFingerprint() { t_fingerprint = previous_; }

void BranchFingerprint::mix(std::uint64_t token) { hash_ = SplitMix64::mix(hash_ ^ (token + 0x9E3779B97F4A7C15ULL)); }

namespace detail {
BranchFingerprint* branch_fingerprint() { return t_fingerprint; }
}  // namespace detail

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

// --- BasicTensor -----------------------------------------------------------

template <typename T>
BasicTensor<T> BasicTensor<T>::create(const Shape& shape, const Init<T>& init) {
    validate_shape(shape);
    BasicTensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = shape;
    const std::size_t n = shape_numel(shape);
    auto& data = t.impl_->data;
    if (const auto* c = std::get_if<Constant<T>>(&init)) {
        data.assign(n, c->value);
    } else if (const auto* he = std::get_if<HeNormal>(&init)) {
        std::size_t fan_in = he->fan_in;
        if (fan_in == 0) fan_in = shape.size() == 1 ? shape[0] : n / shape[0];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        SplitMix64 rng(he->seed);
        data.resize(n);
        for (auto& v : data) v = static_cast<T>(stddev * rng.normal());
    } else if (const auto* ex = std::get_if<Explicit<T>>(&init)) {
        if (ex->values.size() != n)
            throw ShapeError("explicit values length " + std::to_string(ex->values.size()) +
                             " does not match shape " + shape_str(shape));
        data = ex->values;
    } else {
        data.assign(n, T(0));
    }
    return t;
}

template <typename T>
T BasicTensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl().data[0];
}

template <typename T>
void BasicTensor<T>::zero_grad() {
    impl().grad.assign(impl().data.size(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
    BasicTensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = impl().shape;
    t.impl_->data = impl().data;
    t.impl_->requires_grad = impl().requires_grad;
    return t;
}

template <typename T>
template <typename U>
BasicTensor<U> BasicTensor<T>::cast() const {
    std::vector<U> values(impl().data.begin(), impl().data.end());
    auto t = BasicTensor<U>::from(impl().shape, std::move(values));
    t.set_requires_grad(impl().requires_grad);
    return t;
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
    if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
    ComputationRecord* rec = ComputationRecord::active();
    if (rec == nullptr) throw std::logic_error("backward() called without an active computation record");
    auto& impl = *loss.handle();
    impl.grad.assign(1, T(1));
    rec->replay_backward();
}

// --- op helpers --------------------------------------------------------------

namespace detail {

template <typename T>
BasicTensor<T> make_output(const Shape& shape) {
    return BasicTensor<T>::zeros(shape);
}

template <typename T>
bool needs_record(std::initializer_list<const BasicTensor<T>*> inputs) {
    if (ComputationRecord::active() == nullptr) return false;
    for (const auto* in : inputs)
        if (in->requires_grad()) return true;
    return false;
}

template <typename T>
void check_finite(const char* tag, const BasicTensor<T>& out) {
    if (!g_finite_checks) return;
    for (T v : out.data())
        if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite value produced by ") + tag);
}

template <typename T>
void attach(const char* tag, std::initializer_list<const BasicTensor<T>*> inputs, BasicTensor<T>& out,
            std::function<void(const std::vector<T>&)> grad_fn) {
    check_finite(tag, out);
    if (!needs_record(inputs)) return;
    ComputationRecord* rec = ComputationRecord::active();
    ComputationRecord::Node node;
    node.tag = tag;
    std::vector<ImplPtr<T>> grads_for;
    for (const auto* in : inputs) {
        if (auto id = in->node_id(); id && *id < rec->size()) node.inputs.push_back(*id);
        if (in->requires_grad()) grads_for.push_back(in->handle());
    }
    ImplPtr<T> o = out.handle();
    node.backward = [o, grads_for = std::move(grads_for), fn = std::move(grad_fn)] {
        for (const auto& g : grads_for) g->ensure_grad();
        if (!o->grad.empty()) fn(o->grad);
    };
    out.set_requires_grad(true);
    out.handle()->node_id = rec->append(std::move(node));
}

}  // namespace detail

// --- debug dump ------------------------------------------------------------

namespace {

template <typename U>
void put_le(std::ostream& os, U value) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    os.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    U value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(U));
    if (!is) throw std::runtime_error("truncated tensor dump");
    return value;
}

}  // namespace

void write_tensor_dump(const Tensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write("TNSR", 4);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * 4));
    if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor read_tensor_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "TNSR", 4) != 0) throw std::runtime_error("bad magic in tensor dump");
    const auto rank = get_le<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& e : shape) e = get_le<std::uint32_t>(is);
    std::vector<float> values(shape_numel(shape));
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
    if (!is) throw std::runtime_error("truncated tensor dump");
    return Tensor::from(shape, std::move(values));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<double> BasicTensor<float>::cast<double>() const;
template BasicTensor<float> BasicTensor<double>::cast<float>() const;
template BasicTensor<float> BasicTensor<float>::cast<float>() const;
template BasicTensor<double> BasicTensor<double>::cast<double>() const;
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);

namespace detail {
template BasicTensor<float> make_output(const Shape&);
template BasicTensor<double> make_output(const Shape&);
template bool needs_record(std::initializer_list<const BasicTensor<float>*>);
template bool needs_record(std::initializer_list<const BasicTensor<double>*>);
template void check_finite(const char*, const BasicTensor<float>&);
template void check_finite(const char*, const BasicTensor<double>&);
template void attach(const char*, std::initializer_list<const BasicTensor<float>*>, BasicTensor<float>&,
                     std::function<void(const std::vector<float>&)>);
template void attach(const char*, std::initializer_list<const BasicTensor<double>*>, BasicTensor<double>&,
                     std::function<void(const std::vector<double>&)>);
}  // namespace detail

}  // namespace runet
