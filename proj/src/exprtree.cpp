#include "shapesr/exprtree.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>

namespace shapesr {

const char* name(BinaryKind k) {
    switch (k) {
        case BinaryKind::Add: return "+";
        case BinaryKind::Sub: return "-";
        case BinaryKind::Mul: return "*";
        case BinaryKind::Div: return "/";
        case BinaryKind::Pow: return "^";
    }
    return "?";
}

const char* name(UnaryKind k) {
    switch (k) {
        case UnaryKind::Exp: return "exp";
        case UnaryKind::Sqrt: return "sqrt";
        case UnaryKind::Pow2: return "pow2";
        case UnaryKind::Pow3: return "pow3";
    }
    return "?";
}

NodePtr make_binary(BinaryKind k, NodePtr l, NodePtr r) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Binary;
    n->bin = k;
    n->left = std::move(l);
    n->right = std::move(r);
    return n;
}

NodePtr make_unary(UnaryKind k, NodePtr c) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Unary;
    n->un = k;
    n->left = std::move(c);
    return n;
}

NodePtr make_variable(int index) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Variable;
    n->index = index;
    return n;
}

NodePtr make_parameter(int index, double seed_value) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Parameter;
    n->index = index;
    n->value = seed_value;
    return n;
}

NodePtr make_constant(double v) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Constant;
    n->value = v;
    return n;
}

namespace {

template <class F>
void walk(const NodePtr& n, F&& f) {
    if (!n) return;
    f(*n);
    walk(n->left, f);
    walk(n->right, f);
}

int node_count(const NodePtr& n) {
    if (!n) return 0;
    return 1 + node_count(n->left) + node_count(n->right);
}

int node_depth(const NodePtr& n) {
    if (!n) return 0;
    return 1 + std::max(node_depth(n->left), node_depth(n->right));
}

}  // namespace

int Expression::complexity() const { return node_count(root_); }
int Expression::depth() const { return node_depth(root_); }

int Expression::param_count() const {
    int mx = -1;
    walk(root_, [&](const Node& n) {
        if (n.tag == Node::Tag::Parameter) mx = std::max(mx, n.index);
    });
    return mx + 1;
}

int Expression::max_variable_index() const {
    int mx = -1;
    walk(root_, [&](const Node& n) {
        if (n.tag == Node::Tag::Variable) mx = std::max(mx, n.index);
    });
    return mx;
}

bool Expression::pow_exponents_parameter_only() const {
    bool ok = true;
    walk(root_, [&](const Node& n) {
        if (n.tag == Node::Tag::Binary && n.bin == BinaryKind::Pow) {
            const Node& r = *n.right;
            if (r.tag != Node::Tag::Parameter && r.tag != Node::Tag::Constant) ok = false;
        }
    });
    return ok;
}

int complexity(const Expression& e) { return e.complexity(); }

namespace {

void emit(const NodePtr& n, CompiledExpr& ce, int depth) {
    ce.stack_need = std::max(ce.stack_need, depth + 1);
    switch (n->tag) {
        case Node::Tag::Variable:
            ce.code.push_back({OpCode::Var, n->index, 0.0});
            ce.nvars = std::max(ce.nvars, n->index + 1);
            break;
        case Node::Tag::Parameter:
            ce.code.push_back({OpCode::Param, n->index, 0.0});
            ce.nparams = std::max(ce.nparams, n->index + 1);
            break;
        case Node::Tag::Constant:
            ce.code.push_back({OpCode::Const, 0, n->value});
            break;
        case Node::Tag::Unary: {
            emit(n->left, ce, depth);
            OpCode op = OpCode::Exp;
            switch (n->un) {
                case UnaryKind::Exp: op = OpCode::Exp; break;
                case UnaryKind::Sqrt: op = OpCode::Sqrt; break;
                case UnaryKind::Pow2: op = OpCode::Pow2; break;
                case UnaryKind::Pow3: op = OpCode::Pow3; break;
            }
            ce.code.push_back({op, 0, 0.0});
            break;
        }
        case Node::Tag::Binary: {
            emit(n->left, ce, depth);
            emit(n->right, ce, depth + 1);
            OpCode op = OpCode::Add;
            switch (n->bin) {
                case BinaryKind::Add: op = OpCode::Add; break;
                case BinaryKind::Sub: op = OpCode::Sub; break;
                case BinaryKind::Mul: op = OpCode::Mul; break;
                case BinaryKind::Div: op = OpCode::Div; break;
                case BinaryKind::Pow: op = OpCode::Pow; break;
            }
            ce.code.push_back({op, 0, 0.0});
            break;
        }
    }
}

}  // namespace

CompiledExpr compile(const Expression& e) {
    if (e.empty()) throw std::invalid_argument("compile: empty expression");
    CompiledExpr ce;
    emit(e.root(), ce, 0);
    if (ce.stack_need > kMaxEvalStack) throw std::invalid_argument("compile: expression too deep");
    return ce;
}

double evaluate(const CompiledExpr& ce, std::span<const double> x_row, std::span<const double> p) {
    double v = eval_program<double>(
        ce, [&](int i) { return x_row[static_cast<size_t>(i)]; },
        [&](int i) { return p[static_cast<size_t>(i)]; }, [](double c) { return c; });
    return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
}

double evaluate(const Expression& e, std::span<const double> x_row, std::span<const double> p) {
    return evaluate(compile(e), x_row, p);
}

namespace {

NodePtr finalize_rec(const NodePtr& n, std::vector<double>& out) {
    switch (n->tag) {
        case Node::Tag::Parameter: {
            int idx = static_cast<int>(out.size());
            out.push_back(n->value);
            return make_parameter(idx, n->value);
        }
        case Node::Tag::Variable:
        case Node::Tag::Constant:
            return n;
        case Node::Tag::Unary:
            return make_unary(n->un, finalize_rec(n->left, out));
        case Node::Tag::Binary: {
            auto l = finalize_rec(n->left, out);
            auto r = finalize_rec(n->right, out);
            return make_binary(n->bin, std::move(l), std::move(r));
        }
    }
    return n;
}

NodePtr stamp_rec(const NodePtr& n, std::span<const double> p) {
    switch (n->tag) {
        case Node::Tag::Parameter:
            return make_parameter(n->index, p[static_cast<size_t>(n->index)]);
        case Node::Tag::Variable:
        case Node::Tag::Constant:
            return n;
        case Node::Tag::Unary:
            return make_unary(n->un, stamp_rec(n->left, p));
        case Node::Tag::Binary:
            return make_binary(n->bin, stamp_rec(n->left, p), stamp_rec(n->right, p));
    }
    return n;
}

}  // namespace

std::pair<Expression, std::vector<double>> finalize_parameters(const Expression& e) {
    std::vector<double> p;
    if (e.empty()) return {e, p};
    NodePtr root = finalize_rec(e.root(), p);
    return {Expression(std::move(root)), std::move(p)};
}

Expression stamp_parameters(const Expression& e, std::span<const double> p) {
    if (e.empty()) return e;
    return Expression(stamp_rec(e.root(), p));
}

namespace {

bool is_const(const NodePtr& n, double v) {
    return n->tag == Node::Tag::Constant && n->value == v;
}

double fold_unary(UnaryKind k, double x) {
    switch (k) {
        case UnaryKind::Exp: return std::exp(x);
        case UnaryKind::Sqrt: return std::sqrt(x);
        case UnaryKind::Pow2: return x * x;
        case UnaryKind::Pow3: return x * x * x;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double fold_binary(BinaryKind k, double a, double b) {
    switch (k) {
        case BinaryKind::Add: return a + b;
        case BinaryKind::Sub: return a - b;
        case BinaryKind::Mul: return a * b;
        case BinaryKind::Div: return a / b;
        case BinaryKind::Pow: return std::pow(a, b);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// One bottom-up simplification pass; sets `changed` when a rewrite fired.
NodePtr simplify_rec(const NodePtr& n, bool& changed) {
    switch (n->tag) {
        case Node::Tag::Variable:
        case Node::Tag::Parameter:
        case Node::Tag::Constant:
            return n;
        case Node::Tag::Unary: {
            NodePtr c = simplify_rec(n->left, changed);
            if (c->tag == Node::Tag::Constant) {
                double v = fold_unary(n->un, c->value);
                if (std::isfinite(v)) {
                    changed = true;
                    return make_constant(v);
                }
            }
            return c == n->left ? n : make_unary(n->un, std::move(c));
        }
        case Node::Tag::Binary: {
            NodePtr l = simplify_rec(n->left, changed);
            NodePtr r = simplify_rec(n->right, changed);
            if (l->tag == Node::Tag::Constant && r->tag == Node::Tag::Constant) {
                double v = fold_binary(n->bin, l->value, r->value);
                if (std::isfinite(v)) {
                    changed = true;
                    return make_constant(v);
                }
            }
            switch (n->bin) {
                case BinaryKind::Add:
                    if (is_const(r, 0.0)) { changed = true; return l; }
                    if (is_const(l, 0.0)) { changed = true; return r; }
                    break;
                case BinaryKind::Sub:
                    if (is_const(r, 0.0)) { changed = true; return l; }
                    break;
                case BinaryKind::Mul:
                    if (is_const(l, 0.0) || is_const(r, 0.0)) { changed = true; return make_constant(0.0); }
                    if (is_const(r, 1.0)) { changed = true; return l; }
                    if (is_const(l, 1.0)) { changed = true; return r; }
                    break;
                case BinaryKind::Div:
                    if (is_const(r, 1.0)) { changed = true; return l; }
                    if (is_const(l, 0.0)) { changed = true; return make_constant(0.0); }
                    break;
                case BinaryKind::Pow:
                    if (is_const(r, 1.0)) { changed = true; return l; }
                    if (is_const(r, 0.0)) { changed = true; return make_constant(1.0); }
                    if (is_const(l, 1.0)) { changed = true; return make_constant(1.0); }
                    break;
            }
            if (l == n->left && r == n->right) return n;
            return make_binary(n->bin, std::move(l), std::move(r));
        }
    }
    return n;
}

NodePtr round_params_rec(const NodePtr& n, std::span<const double> p, double threshold, bool& changed) {
    switch (n->tag) {
        case Node::Tag::Parameter: {
            double v = p[static_cast<size_t>(n->index)];
            if (std::abs(v) <= threshold) { changed = true; return make_constant(0.0); }
            if (std::abs(v - 1.0) <= threshold) { changed = true; return make_constant(1.0); }
            return make_parameter(n->index, v);
        }
        case Node::Tag::Variable:
        case Node::Tag::Constant:
            return n;
        case Node::Tag::Unary:
            return make_unary(n->un, round_params_rec(n->left, p, threshold, changed));
        case Node::Tag::Binary: {
            auto l = round_params_rec(n->left, p, threshold, changed);
            auto r = round_params_rec(n->right, p, threshold, changed);
            return make_binary(n->bin, std::move(l), std::move(r));
        }
    }
    return n;
}

}  // namespace

std::pair<Expression, std::vector<double>> drastic_simplify(const Expression& e,
                                                            std::span<const double> p,
                                                            double threshold) {
    if (e.empty()) return {e, {}};
    if (threshold <= 0.0) throw std::invalid_argument("drastic_simplify: threshold must be > 0");
    bool rounded = false;
    NodePtr root = round_params_rec(e.root(), p, threshold, rounded);
    bool changed = true;
    int guard = node_count(root) + 2;
    while (changed && guard-- > 0) {
        changed = false;
        root = simplify_rec(root, changed);
    }
    return finalize_parameters(Expression(std::move(root)));
}

namespace {

void print_rec(const NodePtr& n, std::span<const double> p,
               std::span<const std::string> vars, bool structural, std::string& out) {
    char buf[40];
    switch (n->tag) {
        case Node::Tag::Variable:
            if (n->index < static_cast<int>(vars.size())) {
                out += vars[static_cast<size_t>(n->index)];
            } else {
                std::snprintf(buf, sizeof buf, "x%d", n->index);
                out += buf;
            }
            break;
        case Node::Tag::Parameter:
            if (structural) {
                std::snprintf(buf, sizeof buf, "p%d", n->index);
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", p[static_cast<size_t>(n->index)]);
            }
            out += buf;
            break;
        case Node::Tag::Constant:
            std::snprintf(buf, sizeof buf, "%.17g", n->value);
            out += buf;
            break;
        case Node::Tag::Unary:
            out += name(n->un);
            out += '(';
            print_rec(n->left, p, vars, structural, out);
            out += ')';
            break;
        case Node::Tag::Binary:
            out += '(';
            print_rec(n->left, p, vars, structural, out);
            out += ' ';
            out += name(n->bin);
            out += ' ';
            print_rec(n->right, p, vars, structural, out);
            out += ')';
            break;
    }
}

}  // namespace

std::string to_string(const Expression& e, std::span<const double> p,
                      std::span<const std::string> var_names) {
    std::string out;
    if (!e.empty()) print_rec(e.root(), p, var_names, false, out);
    return out;
}

std::string structure_key(const Expression& e) {
    std::string out;
    if (!e.empty()) print_rec(e.root(), {}, {}, true, out);
    return out;
}

void validate(const Expression& e, int nvars, int nparams, bool pow_param_only) {
    if (e.empty()) throw std::invalid_argument("validate: empty expression");
    walk(e.root(), [&](const Node& n) {
        switch (n.tag) {
            case Node::Tag::Variable:
                if (n.index < 0 || n.index >= nvars)
                    throw std::invalid_argument("validate: variable index out of range");
                break;
            case Node::Tag::Parameter:
                if (n.index < 0 || n.index >= nparams)
                    throw std::invalid_argument("validate: parameter index out of range");
                break;
            case Node::Tag::Unary:
                if (!n.left) throw std::invalid_argument("validate: unary without child");
                break;
            case Node::Tag::Binary:
                if (!n.left || !n.right) throw std::invalid_argument("validate: binary without children");
                break;
            default:
                break;
        }
    });
    if (pow_param_only && !e.pow_exponents_parameter_only())
        throw std::invalid_argument("validate: pow exponent must be parameter or constant");
}

}  // namespace shapesr
