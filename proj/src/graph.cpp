#include "midt/graph.hpp"

#include <cmath>

namespace midt {

Tensor& ParameterStore::add(const std::string& name, Tensor init) {
    if (has(name)) throw Error("ParameterStore: duplicate parameter '" + name + "'");
    ParamEntry e;
    e.m = Tensor::zeros(init.shape);
    e.v = Tensor::zeros(init.shape);
    e.value = std::move(init);
    return entries.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParameterStore::at(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw Error("ParameterStore: unknown parameter '" + name + "'");
    return it->second.value;
}

const Tensor& ParameterStore::at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw Error("ParameterStore: unknown parameter '" + name + "'");
    return it->second.value;
}

void adam_step(ParameterStore& store, const GradMap& grads, double lr,
               double beta1, double beta2, double eps_opt) {
    for (const auto& [name, g] : grads)
        if (!store.has(name)) throw Error("adam_step: gradient for unknown parameter '" + name + "'");
    for (auto& [name, e] : store.entries) {
        auto it = grads.find(name);
        if (it == grads.end()) throw Error("adam_step: missing gradient for parameter '" + name + "'");
        const Tensor& g = it->second;
        if (!g.same_shape(e.value))
            throw Error("adam_step: gradient shape mismatch for '" + name + "'");
        e.steps += 1;
        double bc1 = 1.0 - std::pow(beta1, double(e.steps));
        double bc2 = 1.0 - std::pow(beta2, double(e.steps));
        for (size_t i = 0; i < e.value.size(); ++i) {
            e.m.data[i] = beta1 * e.m.data[i] + (1.0 - beta1) * g.data[i];
            e.v.data[i] = beta2 * e.v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
            double mhat = e.m.data[i] / bc1;
            double vhat = e.v.data[i] / bc2;
            e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_opt);
        }
    }
}

void Graph::check(bool cond, const std::string& msg, int id) const {
    if (!cond) {
        std::string where = id >= 0 ? " at node " + std::to_string(id) : "";
        throw Error("graph: " + msg + where);
    }
}

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    int id = int(nodes_.size()) - 1;
    eval_node(nodes_[id]);
    return id;
}

int Graph::input(const std::string& name, Tensor value) {
    Node n;
    n.kind = OpKind::Input;
    n.name = name;
    n.value = std::move(value);
    return push(std::move(n));
}

int Graph::placeholder(const std::string& name, std::vector<size_t> shape) {
    Node n;
    n.kind = OpKind::Input;
    n.name = name;
    n.value = Tensor::zeros(std::move(shape));
    n.bound = false;
    return push(std::move(n));
}

int Graph::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Const;
    n.value = std::move(value);
    return push(std::move(n));
}

int Graph::param(ParameterStore& store, const std::string& name) {
    Node n;
    n.kind = OpKind::Param;
    n.name = name;
    n.value = store.at(name);  // snapshot
    return push(std::move(n));
}

void Graph::bind(const std::string& input_name, Tensor value) {
    for (auto& n : nodes_) {
        if (n.kind == OpKind::Input && n.name == input_name) {
            if (n.value.shape != value.shape)
                throw Error("graph: bind shape mismatch for input '" + input_name + "'");
            n.value = std::move(value);
            n.bound = true;
            return;
        }
    }
    throw Error("graph: no input leaf named '" + input_name + "'");
}

#define BINARY_OP(fn, opkind)                      \
    int Graph::fn(int a, int b) {                  \
        Node n;                                    \
        n.kind = opkind;                           \
        n.a = a; n.b = b;                          \
        return push(std::move(n));                 \
    }

BINARY_OP(add, OpKind::Add)
BINARY_OP(sub, OpKind::Sub)
BINARY_OP(mul, OpKind::Mul)
BINARY_OP(matmul, OpKind::MatMul)
BINARY_OP(concat, OpKind::Concat)
#undef BINARY_OP

int Graph::scale(int a, double s) {
    Node n; n.kind = OpKind::Scale; n.a = a; n.attr = s;
    return push(std::move(n));
}
int Graph::conv1d(int x, int kernel, size_t dilation) {
    Node n; n.kind = OpKind::Conv1d; n.a = x; n.b = kernel; n.p0 = dilation;
    return push(std::move(n));
}
int Graph::slice(int a, size_t start, size_t len) {
    Node n; n.kind = OpKind::Slice; n.a = a; n.p0 = start; n.p1 = len;
    return push(std::move(n));
}
int Graph::frame(int a, size_t window, size_t hop) {
    Node n; n.kind = OpKind::Frame; n.a = a; n.p0 = window; n.p1 = hop;
    return push(std::move(n));
}
int Graph::reshape(int a, std::vector<size_t> shape) {
    Node n; n.kind = OpKind::Reshape; n.a = a; n.aux_shape = std::move(shape);
    return push(std::move(n));
}
int Graph::broadcast_col(int a, size_t ncols) {
    Node n; n.kind = OpKind::BroadcastCol; n.a = a; n.p0 = ncols;
    return push(std::move(n));
}

#define UNARY_OP(fn, opkind)                       \
    int Graph::fn(int a) {                         \
        Node n; n.kind = opkind; n.a = a;          \
        return push(std::move(n));                 \
    }

UNARY_OP(relu, OpKind::Relu)
UNARY_OP(tanh_, OpKind::Tanh)
UNARY_OP(abs_, OpKind::Abs)
UNARY_OP(square, OpKind::Square)
UNARY_OP(exp_, OpKind::Exp)
UNARY_OP(sum, OpKind::Sum)
UNARY_OP(mean, OpKind::Mean)
#undef UNARY_OP

int Graph::log_floor(int a, double floor) {
    Node n; n.kind = OpKind::LogFloor; n.a = a; n.attr = floor;
    return push(std::move(n));
}
int Graph::sqrt_floor(int a, double floor) {
    Node n; n.kind = OpKind::SqrtFloor; n.a = a; n.attr = floor;
    return push(std::move(n));
}

void Graph::eval_node(Node& n) {
    int id = int(&n - nodes_.data());
    auto& A = n.a >= 0 ? nodes_[n.a].value : n.value;
    auto& B = n.b >= 0 ? nodes_[n.b].value : n.value;
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
        case OpKind::Const:
            break;
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            check(A.same_shape(B), "elementwise op shape mismatch " + A.shape_str() + " vs " + B.shape_str(), id);
            n.value = Tensor::zeros(A.shape);
            for (size_t i = 0; i < A.size(); ++i)
                n.value.data[i] = n.kind == OpKind::Add ? A.data[i] + B.data[i]
                                : n.kind == OpKind::Sub ? A.data[i] - B.data[i]
                                                        : A.data[i] * B.data[i];
            break;
        }
        case OpKind::Scale: {
            n.value = A;
            for (auto& v : n.value.data) v *= n.attr;
            break;
        }
        case OpKind::MatMul: {
            check(A.rank() == 2 && B.rank() == 2, "matmul needs rank-2 inputs", id);
            check(A.shape[1] == B.shape[0],
                  "matmul inner dim mismatch " + A.shape_str() + " vs " + B.shape_str(), id);
            size_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
            n.value = Tensor::zeros({m, p});
            for (size_t i = 0; i < m; ++i)
                for (size_t l = 0; l < k; ++l) {
                    double a = A.data[i * k + l];
                    if (a == 0.0) continue;
                    for (size_t j = 0; j < p; ++j)
                        n.value.data[i * p + j] += a * B.data[l * p + j];
                }
            break;
        }
        case OpKind::Conv1d: {
            check(A.rank() == 2 && B.rank() == 3, "conv1d needs x rank-2 and kernel rank-3", id);
            size_t cin = A.shape[0], L = A.shape[1];
            size_t cout = B.shape[0], K = B.shape[2];
            check(B.shape[1] == cin, "conv1d channel mismatch " + A.shape_str() + " vs " + B.shape_str(), id);
            size_t d = n.p0;
            long half = long(K / 2);
            n.value = Tensor::zeros({cout, L});
            for (size_t o = 0; o < cout; ++o)
                for (size_t ci = 0; ci < cin; ++ci) {
                    const double* kr = &B.data[(o * cin + ci) * K];
                    const double* xr = &A.data[ci * L];
                    double* yr = &n.value.data[o * L];
                    for (size_t j = 0; j < K; ++j) {
                        long off = (long(j) - half) * long(d);
                        double w = kr[j];
                        if (w == 0.0) continue;
                        long t0 = std::max(0L, -off);
                        long t1 = std::min(long(L), long(L) - off);
                        for (long t = t0; t < t1; ++t) yr[t] += w * xr[t + off];
                    }
                }
            break;
        }
        case OpKind::Slice: {
            check(n.p0 + n.p1 <= A.size(), "slice out of range", id);
            n.value = Tensor({n.p1}, std::vector<double>(A.data.begin() + long(n.p0),
                                                         A.data.begin() + long(n.p0 + n.p1)));
            break;
        }
        case OpKind::Frame: {
            check(A.rank() == 1, "frame needs a rank-1 input", id);
            size_t W = n.p0, hop = n.p1, L = A.size();
            check(W >= 1 && hop >= 1 && W <= L, "frame window/hop invalid for length " + std::to_string(L), id);
            size_t F = (L - W) / hop + 1;
            n.value = Tensor::zeros({F, W});
            for (size_t f = 0; f < F; ++f)
                for (size_t i = 0; i < W; ++i)
                    n.value.data[f * W + i] = A.data[f * hop + i];
            break;
        }
        case OpKind::Concat: {
            std::vector<double> d = A.data;
            d.insert(d.end(), B.data.begin(), B.data.end());
            size_t len = d.size();
            n.value = Tensor({len}, std::move(d));
            break;
        }
        case OpKind::Reshape: {
            check(Tensor::size_from_shape(n.aux_shape) == A.size(), "reshape size mismatch", id);
            n.value = Tensor(n.aux_shape, A.data);
            break;
        }
        case OpKind::BroadcastCol: {
            check(A.rank() == 1, "broadcast_col needs a rank-1 input", id);
            size_t rows = A.size(), cols = n.p0;
            n.value = Tensor::zeros({rows, cols});
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < cols; ++j) n.value.data[i * cols + j] = A.data[i];
            break;
        }
        case OpKind::Relu: {
            n.value = A;
            for (auto& v : n.value.data) v = v > 0.0 ? v : 0.0;
            break;
        }
        case OpKind::Tanh: {
            n.value = A;
            for (auto& v : n.value.data) v = std::tanh(v);
            break;
        }
        case OpKind::Abs: {
            n.value = A;
            for (auto& v : n.value.data) v = std::fabs(v);
            break;
        }
        case OpKind::Square: {
            n.value = A;
            for (auto& v : n.value.data) v = v * v;
            break;
        }
        case OpKind::Exp: {
            n.value = A;
            for (auto& v : n.value.data) v = std::exp(v);
            break;
        }
        case OpKind::LogFloor: {
            n.value = A;
            for (auto& v : n.value.data) v = std::log(std::max(v, n.attr));
            break;
        }
        case OpKind::SqrtFloor: {
            n.value = A;
            for (auto& v : n.value.data) v = std::sqrt(std::max(v, n.attr));
            break;
        }
        case OpKind::Sum:
        case OpKind::Mean: {
            double s = 0.0;
            for (double v : A.data) s += v;
            if (n.kind == OpKind::Mean) s /= double(A.size());
            n.value = Tensor::scalar(s);
            break;
        }
    }
}

void Graph::recompute() {
    for (auto& n : nodes_) {
        if (n.kind == OpKind::Input && !n.bound)
            throw Error("graph: unbound input leaf '" + n.name + "'");
        if (n.kind != OpKind::Input && n.kind != OpKind::Param && n.kind != OpKind::Const)
            eval_node(n);
    }
}

void Graph::backward(int root, const Tensor& seed) {
    check(root >= 0 && root < int(nodes_.size()), "backward: bad root id");
    for (auto& n : nodes_)
        if (n.kind == OpKind::Input && !n.bound)
            throw Error("graph: backward before evaluate (unbound input '" + n.name + "')");
    check(seed.shape == nodes_[root].value.shape, "backward: seed shape mismatch");
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
    nodes_[root].grad = seed;
    has_backward_ = true;

    // nodes are in topological order by construction
    for (int id = int(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[id];
        const Tensor& G = n.grad;
        if (n.a < 0) continue;
        Tensor& GA = nodes_[n.a].grad;
        const Tensor& A = nodes_[n.a].value;
        switch (n.kind) {
            case OpKind::Add:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
                for (size_t i = 0; i < G.size(); ++i) nodes_[n.b].grad.data[i] += G.data[i];
                break;
            case OpKind::Sub:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
                for (size_t i = 0; i < G.size(); ++i) nodes_[n.b].grad.data[i] -= G.data[i];
                break;
            case OpKind::Mul: {
                const Tensor& B = nodes_[n.b].value;
                Tensor& GB = nodes_[n.b].grad;
                for (size_t i = 0; i < G.size(); ++i) {
                    GA.data[i] += G.data[i] * B.data[i];
                    GB.data[i] += G.data[i] * A.data[i];
                }
                break;
            }
            case OpKind::Scale:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += n.attr * G.data[i];
                break;
            case OpKind::MatMul: {
                const Tensor& B = nodes_[n.b].value;
                Tensor& GB = nodes_[n.b].grad;
                size_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
                // dA = G * B^T, dB = A^T * G
                for (size_t i = 0; i < m; ++i)
                    for (size_t l = 0; l < k; ++l) {
                        double s = 0.0;
                        for (size_t j = 0; j < p; ++j) s += G.data[i * p + j] * B.data[l * p + j];
                        GA.data[i * k + l] += s;
                    }
                for (size_t l = 0; l < k; ++l)
                    for (size_t j = 0; j < p; ++j) {
                        double s = 0.0;
                        for (size_t i = 0; i < m; ++i) s += A.data[i * k + l] * G.data[i * p + j];
                        GB.data[l * p + j] += s;
                    }
                break;
            }
            case OpKind::Conv1d: {
                const Tensor& Kt = nodes_[n.b].value;
                Tensor& GK = nodes_[n.b].grad;
                size_t cin = A.shape[0], L = A.shape[1];
                size_t cout = Kt.shape[0], K = Kt.shape[2];
                size_t d = n.p0;
                long half = long(K / 2);
                for (size_t o = 0; o < cout; ++o)
                    for (size_t ci = 0; ci < cin; ++ci) {
                        const double* kr = &Kt.data[(o * cin + ci) * K];
                        double* gkr = &GK.data[(o * cin + ci) * K];
                        const double* xr = &A.data[ci * L];
                        double* gxr = &GA.data[ci * L];
                        const double* gyr = &G.data[o * L];
                        for (size_t j = 0; j < K; ++j) {
                            long off = (long(j) - half) * long(d);
                            long t0 = std::max(0L, -off);
                            long t1 = std::min(long(L), long(L) - off);
                            double w = kr[j];
                            double gk = 0.0;
                            for (long t = t0; t < t1; ++t) {
                                gxr[t + off] += w * gyr[t];
                                gk += gyr[t] * xr[t + off];
                            }
                            gkr[j] += gk;
                        }
                    }
                break;
            }
            case OpKind::Slice:
                for (size_t i = 0; i < n.p1; ++i) GA.data[n.p0 + i] += G.data[i];
                break;
            case OpKind::Frame: {
                size_t W = n.p0, hop = n.p1;
                size_t F = n.value.shape[0];
                for (size_t f = 0; f < F; ++f)
                    for (size_t i = 0; i < W; ++i) GA.data[f * hop + i] += G.data[f * W + i];
                break;
            }
            case OpKind::Concat: {
                Tensor& GB = nodes_[n.b].grad;
                size_t na = A.size();
                for (size_t i = 0; i < na; ++i) GA.data[i] += G.data[i];
                for (size_t i = 0; i < GB.size(); ++i) GB.data[i] += G.data[na + i];
                break;
            }
            case OpKind::Reshape:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += G.data[i];
                break;
            case OpKind::BroadcastCol: {
                size_t rows = A.size(), cols = n.p0;
                for (size_t i = 0; i < rows; ++i) {
                    double s = 0.0;
                    for (size_t j = 0; j < cols; ++j) s += G.data[i * cols + j];
                    GA.data[i] += s;
                }
                break;
            }
            case OpKind::Relu:
                // subgradient at the kink fixed to 0
                for (size_t i = 0; i < G.size(); ++i)
                    if (A.data[i] > 0.0) GA.data[i] += G.data[i];
                break;
            case OpKind::Tanh:
                for (size_t i = 0; i < G.size(); ++i) {
                    double y = n.value.data[i];
                    GA.data[i] += G.data[i] * (1.0 - y * y);
                }
                break;
            case OpKind::Abs:
                // sign(0) := 0
                for (size_t i = 0; i < G.size(); ++i) {
                    double x = A.data[i];
                    GA.data[i] += G.data[i] * (x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0);
                }
                break;
            case OpKind::Square:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += 2.0 * A.data[i] * G.data[i];
                break;
            case OpKind::Exp:
                for (size_t i = 0; i < G.size(); ++i) GA.data[i] += n.value.data[i] * G.data[i];
                break;
            case OpKind::LogFloor:
                // zero gradient in the floored region
                for (size_t i = 0; i < G.size(); ++i)
                    if (A.data[i] > n.attr) GA.data[i] += G.data[i] / A.data[i];
                break;
            case OpKind::SqrtFloor:
                for (size_t i = 0; i < G.size(); ++i)
                    if (A.data[i] > n.attr) GA.data[i] += 0.5 / n.value.data[i] * G.data[i];
                break;
            case OpKind::Sum:
                for (size_t i = 0; i < A.size(); ++i) GA.data[i] += G.data[0];
                break;
            case OpKind::Mean: {
                double g = G.data[0] / double(A.size());
                for (size_t i = 0; i < A.size(); ++i) GA.data[i] += g;
                break;
            }
            default:
                break;
        }
    }
}

const Tensor& Graph::grad(int id) const {
    if (!has_backward_) throw Error("graph: grad() before backward()");
    return nodes_.at(id).grad;
}

GradMap Graph::param_grads() const {
    if (!has_backward_) throw Error("graph: param_grads() before backward()");
    GradMap out;
    for (const auto& n : nodes_) {
        if (n.kind != OpKind::Param) continue;
        auto it = out.find(n.name);
        if (it == out.end()) {
            out.emplace(n.name, n.grad);
        } else {
            for (size_t i = 0; i < n.grad.size(); ++i) it->second.data[i] += n.grad.data[i];
        }
    }
    return out;
}

Tensor Graph::input_grad(const std::string& name) const {
    if (!has_backward_) throw Error("graph: input_grad() before backward()");
    for (const auto& n : nodes_)
        if (n.kind == OpKind::Input && n.name == name) return n.grad;
    throw Error("graph: no input leaf named '" + name + "'");
}

double finite_difference_check(const GraphBuilder& build, ParameterStore& store,
                               const std::string& param_name, double epsilon) {
    if (epsilon <= 0.0) throw Error("finite_difference_check: epsilon must be > 0");

    Graph g;
    int root = build(g, store);
    if (g.value(root).size() != 1)
        throw Error("finite_difference_check: graph root must be scalar");
    g.backward(root);
    GradMap grads = g.param_grads();
    auto git = grads.find(param_name);
    if (git == grads.end())
        throw Error("finite_difference_check: parameter '" + param_name + "' not in graph");
    const Tensor analytic = git->second;

    Tensor& p = store.at(param_name);
    double max_rel = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double keep = p.data[i];
        p.data[i] = keep + epsilon;
        Graph gp;
        double fp = gp.value(build(gp, store)).data[0];
        p.data[i] = keep - epsilon;
        Graph gm;
        double fm = gm.value(build(gm, store)).data[0];
        p.data[i] = keep;
        double fd = (fp - fm) / (2.0 * epsilon);
        double a = analytic.data[i];
        double rel = std::fabs(fd - a) / std::max({std::fabs(fd), std::fabs(a), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace midt
