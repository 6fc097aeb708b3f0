#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "midt/tensor.hpp"

namespace midt {

// Named trainable parameters plus per-parameter adaptive-moment state.
struct ParamEntry {
    Tensor value;
    Tensor m;  // first moment
    Tensor v;  // second moment
    long steps = 0;
};

struct ParameterStore {
    std::map<std::string, ParamEntry> entries;  // ordered map: deterministic iteration

    Tensor& add(const std::string& name, Tensor init);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return entries.count(name) != 0; }
};

using GradMap = std::map<std::string, Tensor>;

// Bias-corrected adaptive-moment update, applied in place.
// grads must be keyed identically to the store.
void adam_step(ParameterStore& store, const GradMap& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps_opt = 1e-8);

enum class OpKind {
    Input, Param, Const,
    Add, Sub, Mul, Scale,
    MatMul, Conv1d,
    Slice, Frame, Concat, Reshape, BroadcastCol,
    Relu, Tanh, Abs, Square, Exp, LogFloor, SqrtFloor,
    Sum, Mean,
};

// Define-by-run compute graph: node values are computed eagerly as the graph
// is built, then backward() runs reverse-mode accumulation. A graph is
// single-threaded; rebuild one per training step.
class Graph {
public:
    struct Node {
        OpKind kind;
        int a = -1, b = -1;     // input node ids
        Tensor value;
        Tensor grad;
        std::string name;       // param/input name, or empty
        double attr = 0.0;      // scale factor / log floor / sqrt floor
        size_t p0 = 0, p1 = 0;  // slice start/len, frame window/hop, conv dilation, bcast cols
        bool bound = true;
        std::vector<size_t> aux_shape;  // reshape target
    };

    // leaves
    int input(const std::string& name, Tensor value);
    int placeholder(const std::string& name, std::vector<size_t> shape);
    int constant(Tensor value);
    int param(ParameterStore& store, const std::string& name);

    void bind(const std::string& input_name, Tensor value);

    // ops
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double s);
    int matmul(int a, int b);
    int conv1d(int x, int kernel, size_t dilation);  // x: Cin x L, kernel: Cout x Cin x K, same padding
    int slice(int a, size_t start, size_t len);      // over flat row-major data, result rank 1
    int frame(int a, size_t window, size_t hop);     // vector L -> F x window
    int concat(int a, int b);                        // flat concat, result rank 1
    int reshape(int a, std::vector<size_t> shape);
    int broadcast_col(int a, size_t ncols);          // vector n -> n x ncols
    int relu(int a);
    int tanh_(int a);
    int abs_(int a);
    int square(int a);
    int exp_(int a);
    int log_floor(int a, double floor);
    int sqrt_floor(int a, double floor);
    int sum(int a);
    int mean(int a);

    const Tensor& value(int id) const { return nodes_.at(id).value; }
    const Tensor& grad(int id) const;
    size_t node_count() const { return nodes_.size(); }

    // Recompute every node's value from the current leaf values
    // (after bind()). Throws on unbound placeholders.
    void recompute();

    // Reverse-mode accumulation from root; seed shape must match root shape.
    // Must be called after values are available (they always are unless a
    // placeholder is unbound).
    void backward(int root, const Tensor& seed);
    void backward(int root) { backward(root, Tensor::scalar(1.0)); }

    // Gradients of the last backward() pass for every Param leaf,
    // accumulated by name.
    GradMap param_grads() const;
    // Gradient w.r.t. a named Input leaf.
    Tensor input_grad(const std::string& name) const;

private:
    int push(Node n);
    void eval_node(Node& n);
    void check(bool cond, const std::string& msg, int id = -1) const;

    std::vector<Node> nodes_;
    bool has_backward_ = false;
};

// Max relative error between reverse-mode gradients and central finite
// differences for one parameter of a scalar-rooted graph. The builder must
// construct the same graph against the given store each time it is called.
using GraphBuilder = std::function<int(Graph&, ParameterStore&)>;
double finite_difference_check(const GraphBuilder& build, ParameterStore& store,
                               const std::string& param_name, double epsilon);

}  // namespace midt
