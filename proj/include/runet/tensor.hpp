#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace runet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Computation record
// ---------------------------------------------------------------------------

/// Append-only list of recorded operations. Constructing a record makes it the
/// active record of the calling thread (the previous one is restored on
/// destruction). Differentiable ops append a node whenever a record is active
/// and one of their inputs requires a gradient; backward() replays the nodes
/// in reverse append order and then clears the record.
class ComputationRecord {
   public:
    struct Node {
        std::string tag;
        std::vector<std::size_t> inputs;  // node ids of recorded inputs
        std::function<void()> backward;
    };

    ComputationRecord();
    ~ComputationRecord();
    ComputationRecord(const ComputationRecord&) = delete;
    ComputationRecord& operator=(const ComputationRecord&) = delete;

    static ComputationRecord* active();

    std::size_t append(Node node);
    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    /// Visits every node exactly once, last to first, then clears the record.
    void replay_backward();
    void clear() { nodes_.clear(); }

   private:
    std::vector<Node> nodes_;
    ComputationRecord* previous_;
};

/// Temporarily disables recording on the current thread.
class NoGradScope {
   public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

   private:
    bool previous_;
};

bool recording_enabled();

/// Fingerprint of the branch taken inside every piecewise-linear op (relu,
/// max pooling) evaluated on the calling thread while the scope is alive.
/// Equal fingerprints mean two evaluations lie on the same linear piece.
class BranchFingerprint {
   public:
    BranchFingerprint();
    ~BranchFingerprint();
    BranchFingerprint(const BranchFingerprint&) = delete;
    BranchFingerprint& operator=(const BranchFingerprint&) = delete;

    std::uint64_t value() const { return hash_; }
    void reset() { hash_ = 0; }
    void mix(std::uint64_t token);

   private:
    std::uint64_t hash_ = 0;
    BranchFingerprint* previous_;
};

/// When enabled, every op output is scanned for NaN/Inf and a
/// std::domain_error is thrown on the first offending op.
void set_finite_checks(bool enabled);
bool finite_checks();

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty when absent
    bool requires_grad = false;
    std::optional<std::size_t> node_id;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

struct Zeros {};
template <typename T>
struct Constant {
    T value;
};
/// normal(0, sqrt(2 / fan_in)) drawn from SplitMix64(seed) with Box-Muller.
/// fan_in == 0 derives it from the shape: product of all extents but the first
/// (the whole extent for rank-1 shapes).
struct HeNormal {
    std::uint64_t seed = 0;
    std::size_t fan_in = 0;
};
template <typename T>
struct Explicit {
    std::vector<T> values;
};

template <typename T>
using Init = std::variant<Zeros, Constant<T>, HeNormal, Explicit<T>>;

/// Dense row-major N-d array. Copies are shallow handles onto the same
/// storage; use clone() for an independent deep copy.
template <typename T>
class BasicTensor {
   public:
    using value_type = T;
    using Impl = detail::TensorImpl<T>;

    BasicTensor() = default;

    static BasicTensor create(const Shape& shape, const Init<T>& init = Zeros{});
    static BasicTensor zeros(const Shape& shape) { return create(shape, Zeros{}); }
    static BasicTensor constant(const Shape& shape, T value) { return create(shape, Constant<T>{value}); }
    static BasicTensor from(const Shape& shape, std::vector<T> values) {
        return create(shape, Explicit<T>{std::move(values)});
    }
    static BasicTensor scalar(T value) { return create({1}, Constant<T>{value}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl().shape; }
    std::size_t rank() const { return impl().shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl().shape.at(axis); }
    std::size_t numel() const { return impl().data.size(); }

    std::span<T> data() { return impl().data; }
    std::span<const T> data() const { return impl().data; }
    std::vector<T> values() const { return impl().data; }
    T item() const;
    T& operator[](std::size_t i) { return impl().data[i]; }
    const T& operator[](std::size_t i) const { return impl().data[i]; }

    bool has_grad() const { return !impl().grad.empty(); }
    std::span<T> grad() { return impl().grad; }
    std::span<const T> grad() const { return impl().grad; }
    void zero_grad();
    void clear_grad() { impl().grad.clear(); }

    bool requires_grad() const { return impl().requires_grad; }
    BasicTensor& set_requires_grad(bool flag) {
        impl().requires_grad = flag;
        return *this;
    }
    std::optional<std::size_t> node_id() const { return impl().node_id; }

    /// Deep copy of data (not grad), detached from any record.
    BasicTensor clone() const;
    template <typename U>
    BasicTensor<U> cast() const;

    const std::shared_ptr<Impl>& handle() const { return impl_; }
    bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

   private:
    Impl& impl() const {
        if (!impl_) throw std::logic_error("use of undefined tensor");
        return *impl_;
    }
    std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Seeds the loss gradient with 1 and replays the active record.
template <typename T>
void backward(const BasicTensor<T>& loss);

// Debug dump: "TNSR", u8 rank, rank x u32 LE extents, f32 LE values.
void write_tensor_dump(const Tensor& t, const std::string& path);
Tensor read_tensor_dump(const std::string& path);

// ---------------------------------------------------------------------------
// Op-authoring helpers
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

/// Allocates an output tensor (uninitialized contents are zero).
template <typename T>
BasicTensor<T> make_output(const Shape& shape);

/// Registers `out` as the result of `tag` applied to `inputs`. `grad_fn`
/// receives the upstream gradient of `out`; it is only invoked when that
/// gradient exists. Inputs that require grad always end up with an allocated
/// (possibly zero) grad buffer. No-op when nothing is being recorded.
template <typename T>
void attach(const char* tag, std::initializer_list<const BasicTensor<T>*> inputs, BasicTensor<T>& out,
            std::function<void(const std::vector<T>&)> grad_fn);

/// Active fingerprint of the calling thread, or nullptr.
BranchFingerprint* branch_fingerprint();

template <typename T>
bool needs_record(std::initializer_list<const BasicTensor<T>*> inputs);

template <typename T>
void check_finite(const char* tag, const BasicTensor<T>& out);

}  // namespace detail

}  // namespace runet
